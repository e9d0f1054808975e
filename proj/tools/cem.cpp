// Copyright 2026 The cem Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// cem: command line front end.
//
// Exit status: 0 success, 1 check or verdict failure, 2 usage or I/O error.

#include "cem/cem.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

struct Options {
    std::string state;
    std::optional<std::uint64_t> seed;
    std::uint64_t fuel = cem::kDefaultFuel;
    std::string format = "text";

    bool machine() const { return format == "machine"; }
    cem::SchedulerPolicy policy() const {
        return seed ? cem::SchedulerPolicy::seeded(*seed) : cem::SchedulerPolicy::round_robin();
    }
};

/// Errors that mean "the input was wrong" rather than "the check failed".
int exit_code_for(const cem::Error& e) {
    switch (e.code()) {
    case cem::ErrorCode::Io:
    case cem::ErrorCode::Usage:
        return kUsage;
    default:
        return kFailed;
    }
}

cem::Registry load_registry(const Options& o) {
    if (o.state.empty() || !fs::exists(o.state)) {
        return cem::Registry{};
    }
    const std::string text = cem::read_file(o.state);
    cem::Json j;
    try {
        j = cem::Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        cem::fail(cem::ErrorCode::Io, o.state + ": " + e.what());
    }
    return cem::Registry::from_json(j);
}

void save_registry(const Options& o, const cem::Registry& r) {
    if (o.state.empty()) {
        return;
    }
    for (const auto& s : r.system().services) {
        if (!s.threads.empty()) {
            cem::fail(cem::ErrorCode::NotQuiescent,
                      "state not saved: " + s.name() + " still has running threads");
        }
    }
    std::ofstream out(o.state, std::ios::binary | std::ios::trunc);
    if (!out) {
        cem::fail(cem::ErrorCode::Io, "cannot write " + o.state);
    }
    out << r.to_json().dump(2) << "\n";
}

std::vector<fs::path> as_paths(const std::vector<std::string>& files) {
    return {files.begin(), files.end()};
}

int cmd_check(const Options& o, const std::vector<std::string>& files, bool assign_keys) {
    const auto modules = cem::load_modules(as_paths(files));
    cem::check_modules(modules);
    if (assign_keys) {
        for (const auto& m : modules) {
            std::cout << cem::render_module(m);
        }
    } else if (o.machine()) {
        cem::Json names = cem::Json::array();
        for (const auto& m : modules) {
            names.push_back(m.name);
        }
        std::cout << cem::Json{{"ok", true}, {"modules", names}}.dump() << "\n";
    } else {
        std::cout << "ok: " << modules.size() << (modules.size() == 1 ? " module" : " modules")
                  << " well-typed\n";
    }
    return kOk;
}

void print_verdict(const Options& o, const std::string& op, bool accepted,
                   const std::vector<std::string>& labels, const std::vector<std::string>& diagnostics) {
    if (o.machine()) {
        std::cout << cem::Json{{"operation", op},
                               {"accepted", accepted},
                               {"labels", labels},
                               {"diagnostics", diagnostics}}
                       .dump()
                  << "\n";
        return;
    }
    std::cout << op << ": " << (accepted ? "accepted" : "rejected");
    for (const auto& l : labels) {
        std::cout << " " << l;
    }
    std::cout << "\n";
    for (const auto& d : diagnostics) {
        std::cout << "  " << d << "\n";
    }
}

int cmd_deploy(const Options& o, const std::vector<std::string>& files) {
    cem::Registry r = load_registry(o);
    const auto modules = cem::load_modules(as_paths(files));
    cem::DeployOutcome d = r.preflight_deploy(modules);
    std::vector<std::string> labels;
    if (d.event) {
        for (std::size_t i = 0; i < d.event->event.names.size(); ++i) {
            labels.push_back(d.event->event.names[i] + "@" + d.event->event.labels[i]);
        }
    }
    print_verdict(o, "deploy", d.accepted, labels, d.diagnostics());
    save_registry(o, r);
    return d.accepted ? kOk : kFailed;
}

int cmd_undeploy(const Options& o, const std::vector<std::string>& names) {
    cem::Registry r = load_registry(o);
    cem::UndeployOutcome d = r.preflight_undeploy({names.begin(), names.end()});
    print_verdict(o, "undeploy", d.accepted, {}, d.diagnostics());
    save_registry(o, r);
    return d.accepted ? kOk : kFailed;
}

int cmd_call(const Options& o, const std::string& target) {
    const auto dot = target.find('.');
    const auto open = target.find('(');
    if (dot == std::string::npos || open == std::string::npos || open < dot || target.back() != ')') {
        cem::fail(cem::ErrorCode::Usage, "expected <Service>.<fn>(<literal>), got '" + target + "'");
    }
    cem::Value arg;
    try {
        arg = cem::parse_value(target.substr(open + 1, target.size() - open - 2));
    } catch (const cem::Error& e) {
        cem::fail(cem::ErrorCode::Usage, std::string("bad argument: ") + e.what());
    }
    cem::Registry r = load_registry(o);
    cem::Scheduler sched(o.policy());
    cem::CallOutcome c =
      r.call(target.substr(0, dot), target.substr(dot + 1, open - dot - 1), arg, sched, o.fuel);
    if (o.machine()) {
        for (const auto& t : c.run.trace) {
            std::cout << cem::trace_line(t) << "\n";
        }
    }
    if (c.run.exhausted) {
        std::cerr << "FuelExhausted: no result after " << c.run.steps << " steps"
                  << (c.run.deadlocked ? " (threads wait on each other)" : "") << "\n";
        return kFailed;
    }
    if (!c.value) {
        std::cerr << "Stuck: the call did not produce a value\n";
        return kFailed;
    }
    if (!o.machine()) {
        std::cout << cem::render_value(*c.value) << "\n";
        std::cout << "events: " << c.run.count(cem::Event::Kind::Rejected) << " rejected, "
                  << c.run.count(cem::Event::Kind::ProxyGenerated) << " proxy, "
                  << c.run.count(cem::Event::Kind::Invoked) << " invoked, "
                  << c.run.steps << " steps\n";
    }
    save_registry(o, r);
    return kOk;
}

int cmd_run(const Options& o, const std::string& script, const std::string& trace_file) {
    cem::Registry r = load_registry(o);
    cem::ScenarioOptions so;
    so.policy = o.policy();
    so.fuel = o.fuel;
    so.base_dir = fs::path(script).parent_path();
    if (so.base_dir.empty()) {
        so.base_dir = ".";
    }
    const cem::ScenarioResult res = cem::run_scenario(r, cem::read_file(script), so);

    std::ofstream trace_out;
    if (!trace_file.empty()) {
        trace_out.open(trace_file, std::ios::binary | std::ios::trunc);
        if (!trace_out) {
            cem::fail(cem::ErrorCode::Io, "cannot write " + trace_file);
        }
    }
    std::ostream& trace = trace_file.empty() ? std::cout : trace_out;
    for (const auto& line : res.trace) {
        trace << line << "\n";
    }

    std::ostream& report = trace_file.empty() ? std::cerr : std::cout;
    if (o.machine()) {
        cem::Json a = cem::Json::array();
        for (const auto& x : res.assertions) {
            a.push_back(cem::Json{{"line", x.line}, {"expect", x.text}, {"passed", x.passed},
                                  {"detail", x.detail}});
        }
        cem::Json j{{"ok", res.ok()}, {"assertions", a}};
        if (res.error) {
            j["error"] = res.error->describe();
            j["error_line"] = res.error_line;
        }
        report << j.dump() << "\n";
    } else {
        for (const auto& l : res.log) {
            report << l << "\n";
        }
        for (const auto& x : res.assertions) {
            report << (x.passed ? "ok   " : "FAIL ") << "line " << x.line << ": " << x.text;
            if (!x.detail.empty()) {
                report << " (" << x.detail << ")";
            }
            report << "\n";
        }
        if (res.error) {
            report << "line " << res.error_line << ": unexpected " << res.error->describe() << "\n";
        }
        report << (res.ok() ? "scenario passed" : "scenario failed") << "\n";
    }
    if (res.ok()) {
        save_registry(o, r);
    }
    return res.ok() ? kOk : kFailed;
}

int cmd_analyze(const Options& o, const std::string& log_file, const std::string& fixtures) {
    if (fixtures.empty() == log_file.empty()) {
        cem::fail(cem::ErrorCode::Usage, "analyze takes a log file or --fixtures paper");
    }
    if (!fixtures.empty() && fixtures != "paper") {
        cem::fail(cem::ErrorCode::Usage, "unknown fixture set '" + fixtures + "'");
    }
    const std::string text =
      fixtures.empty() ? cem::read_file(log_file) : std::string(cem::factory_study_log());
    const cem::AggregateTable t = cem::aggregate_log(cem::parse_log(text));
    if (!o.machine()) {
        std::cout << cem::render_table(t);
        return kOk;
    }
    cem::Json rows = cem::Json::array();
    for (const auto& f : t.factories) {
        cem::Json row{{"factory", f.factory},   {"changes", f.changes}, {"deployments", f.deployments},
                      {"broken", f.broken},     {"safe", f.safe()},     {"safe_percent", f.safe_percent()}};
        if (f.published_broken) {
            row["published_broken"] = *f.published_broken;
        }
        rows.push_back(std::move(row));
    }
    cem::Json total{{"changes", t.changes},
                    {"deployments", t.deployments},
                    {"broken", t.reported_broken},
                    {"safe", t.reported_safe()},
                    {"safe_percent", cem::percent(t.reported_safe(), t.deployments)},
                    {"computed_broken", t.broken},
                    {"computed_safe", t.safe()},
                    {"computed_safe_percent", cem::percent(t.safe(), t.deployments)}};
    std::cout << cem::Json{{"factories", rows}, {"total", total}}.dump() << "\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Typed microservice evolution: check, deploy and run services"};
    app.require_subcommand(1);
    Options o;
    app.add_option("--state", o.state, "registry state file (created if missing)");
    app.add_option("--seed", o.seed, "seeded random scheduling instead of round robin");
    app.add_option("--fuel", o.fuel, "maximum steps per call");
    app.add_option("--format", o.format, "output format")
      ->check(CLI::IsMember({"text", "machine"}));

    std::vector<std::string> files;
    std::vector<std::string> names;
    std::string target;
    std::string script;
    std::string trace_file;
    std::string log_file;
    std::string fixtures;
    bool assign_keys = false;

    auto* check = app.add_subcommand("check", "parse and typecheck modules");
    check->add_option("files", files, "module files")->required();
    check->add_flag("--assign-keys", assign_keys, "print the modules with @? keys filled in");

    auto* deploy = app.add_subcommand("deploy", "deploy modules as one batch");
    deploy->add_option("files", files, "module files")->required();

    auto* undeploy = app.add_subcommand("undeploy", "remove services");
    undeploy->add_option("names", names, "service names")->required();

    auto* call = app.add_subcommand("call", "call a function and run to completion");
    call->add_option("target", target, "<Service>.<fn>(<literal>)")->required();

    auto* run = app.add_subcommand("run", "run a scenario script");
    run->add_option("script", script, "scenario file")->required();
    run->add_option("--trace", trace_file, "write the trace here instead of stdout");

    auto* analyze = app.add_subcommand("analyze", "aggregate a change log");
    analyze->add_option("log", log_file, "change log file");
    analyze->add_option("--fixtures", fixtures, "built-in data set (paper)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*check) {
            return cmd_check(o, files, assign_keys);
        }
        if (*deploy) {
            return cmd_deploy(o, files);
        }
        if (*undeploy) {
            return cmd_undeploy(o, names);
        }
        if (*call) {
            return cmd_call(o, target);
        }
        if (*run) {
            return cmd_run(o, script, trace_file);
        }
        if (*analyze) {
            return cmd_analyze(o, log_file, fixtures);
        }
    } catch (const cem::Error& e) {
        std::cerr << e.describe() << "\n";
        return exit_code_for(e);
    }
    return kUsage;
}
