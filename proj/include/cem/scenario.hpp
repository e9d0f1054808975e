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

// Scenario scripts: a line-oriented driver for the registry.
//
//   seed <n>                     seeded random scheduling from here on
//   fuel <n>                     step budget for later calls
//   deploy <file>...             one batch; paths relative to the script
//   undeploy <name>...
//   call <Service>.<fn>(<literal>)
//   expect accepted              last deploy/undeploy was accepted
//   expect reject [<key>...]     ... was rejected, citing at least these keys
//   expect error <Code>          last command failed with this error code
//   expect <literal>             last call returned this value
//   expect <kind>-events = <n>   event count of the last call
//                                (rejected, proxy, invoked, resolved, step)
//   expect payload <fn> <key> = <literal>
//                                some request to remote <fn> in the last
//                                call carried this member
//
// `//` and `#` start comments.

#pragma once

#include "cem/registry.hpp"
#include "cem/wire.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace cem {

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        fail(ErrorCode::Io, "cannot read " + p.string());
    }
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline std::vector<Module> load_modules(const std::vector<std::filesystem::path>& files) {
    std::vector<Module> out;
    for (const auto& f : files) {
        try {
            for (auto& m : parse_modules(read_file(f))) {
                out.push_back(std::move(m));
            }
        } catch (Error& e) {
            if (e.code() == ErrorCode::Io) {
                throw;
            }
            throw Error(e.code(), f.filename().string() + ": " + e.what(), e.loc());
        }
    }
    return out;
}

struct ScenarioOptions {
    SchedulerPolicy policy = SchedulerPolicy::round_robin();
    std::uint64_t fuel = kDefaultFuel;
    std::filesystem::path base_dir = ".";
};

struct Assertion {
    int line = 0;
    std::string text;
    bool passed = false;
    std::string detail;
};

struct ScenarioResult {
    // NDJSON, one line per trace entry
    std::vector<std::string> trace;
    std::vector<Assertion> assertions;
    // one line per command outcome
    std::vector<std::string> log;
    // a command failed and no `expect error` claimed it
    std::optional<Error> error;
    int error_line = 0;

    bool ok() const {
        return !error && std::all_of(assertions.begin(), assertions.end(),
                                     [](const Assertion& a) { return a.passed; });
    }
};

namespace detail {

inline std::vector<std::string> words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string w;
    while (in >> w) {
        out.push_back(w);
    }
    return out;
}

inline std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
        } else if (c == '"') {
            in_string = true;
        } else if (c == '#' || (c == '/' && i + 1 < line.size() && line[i + 1] == '/')) {
            return line.substr(0, i);
        }
    }
    return line;
}

inline std::uint64_t parse_u64(const std::string& s, int line) {
    std::size_t used = 0;
    std::uint64_t n = 0;
    try {
        n = std::stoull(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size() || s[0] == '-') {
        fail(ErrorCode::Usage, "line " + std::to_string(line) + ": expected a number, found '" + s + "'");
    }
    return n;
}

struct LastVerdict {
    bool accepted = false;
    KeySet cited;
    std::vector<std::string> diagnostics;
};

} // namespace detail

/// Runs `script` against `registry`. Script syntax errors throw Usage;
/// everything else is reported in the result.
class ScenarioRunner {
public:
    ScenarioRunner(Registry& registry, ScenarioOptions options)
      : registry_(registry)
      , options_(std::move(options))
      , scheduler_(options_.policy)
      , fuel_(options_.fuel) {}

    ScenarioResult run(std::string_view script) {
        ScenarioResult out;
        std::istringstream in{std::string(script)};
        std::string raw;
        int line = 0;
        while (std::getline(in, raw)) {
            ++line;
            const std::string text = trim(strip_comment(raw));
            if (text.empty()) {
                continue;
            }
            if (pending_ && !text.starts_with("expect error")) {
                break;
            }
            command(out, text, line);
        }
        if (pending_) {
            out.error = pending_;
            out.error_line = pending_line_;
        }
        return out;
    }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) {
            return {};
        }
        return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    }

    static std::string strip_comment(const std::string& s) { return detail::strip_comment(s); }

    [[noreturn]] static void usage(int line, const std::string& what) {
        fail(ErrorCode::Usage, "line " + std::to_string(line) + ": " + what);
    }

    void command(ScenarioResult& out, const std::string& text, int line) {
        const auto w = detail::words(text);
        const std::string& op = w[0];
        if (op == "seed") {
            if (w.size() != 2) {
                usage(line, "expected seed <n>");
            }
            scheduler_ = Scheduler(SchedulerPolicy::seeded(detail::parse_u64(w[1], line)));
        } else if (op == "fuel") {
            if (w.size() != 2) {
                usage(line, "expected fuel <n>");
            }
            fuel_ = detail::parse_u64(w[1], line);
        } else if (op == "deploy") {
            if (w.size() < 2) {
                usage(line, "expected deploy <file>...");
            }
            std::vector<std::filesystem::path> files;
            for (std::size_t i = 1; i < w.size(); ++i) {
                files.push_back(options_.base_dir / w[i]);
            }
            guarded(out, line, [&] {
                DeployOutcome d = registry_.preflight_deploy(load_modules(files));
                verdict_ = detail::LastVerdict{d.accepted, d.cited_keys(), d.diagnostics()};
                out.log.push_back("deploy " + join(w, 1) + ": " + (d.accepted ? "accepted" : "rejected"));
                for (const auto& diag : d.diagnostics()) {
                    out.log.push_back("  " + diag);
                }
                if (d.event) {
                    out.trace.push_back(trace_line(*d.event));
                }
            });
        } else if (op == "undeploy") {
            if (w.size() < 2) {
                usage(line, "expected undeploy <name>...");
            }
            std::set<std::string> names(w.begin() + 1, w.end());
            guarded(out, line, [&] {
                UndeployOutcome d = registry_.preflight_undeploy(names);
                KeySet cited;
                for (const auto& [k, consumer] : d.consumed) {
                    cited.insert(k);
                }
                verdict_ = detail::LastVerdict{d.accepted, cited, d.diagnostics()};
                out.log.push_back("undeploy " + join(w, 1) + ": "
                                  + (d.accepted ? "accepted" : "rejected"));
                for (const auto& diag : d.diagnostics()) {
                    out.log.push_back("  " + diag);
                }
                if (d.event) {
                    out.trace.push_back(trace_line(*d.event));
                }
            });
        } else if (op == "call") {
            call(out, trim(text.substr(4)), line);
        } else if (op == "expect") {
            expect(out, trim(text.substr(6)), line);
        } else {
            usage(line, "unknown command '" + op + "'");
        }
    }

    static std::string join(const std::vector<std::string>& w, std::size_t from) {
        std::string out;
        for (std::size_t i = from; i < w.size(); ++i) {
            out += (i > from ? " " : "") + w[i];
        }
        return out;
    }

    template <class F>
    void guarded(ScenarioResult& out, int line, F&& f) {
        try {
            f();
        } catch (const Error& e) {
            if (e.code() == ErrorCode::Usage) {
                throw;
            }
            out.log.push_back("error: " + e.describe());
            pending_ = e;
            pending_line_ = line;
        }
    }

    void call(ScenarioResult& out, const std::string& text, int line) {
        const auto dot = text.find('.');
        const auto open = text.find('(');
        if (dot == std::string::npos || open == std::string::npos || open < dot || text.back() != ')') {
            usage(line, "expected call <Service>.<fn>(<literal>)");
        }
        const std::string service = trim(text.substr(0, dot));
        const std::string fn = trim(text.substr(dot + 1, open - dot - 1));
        Value arg;
        try {
            arg = parse_value(text.substr(open + 1, text.size() - open - 2));
        } catch (const Error& e) {
            usage(line, std::string("bad argument: ") + e.what());
        }
        last_call_.reset();
        guarded(out, line, [&] {
            CallOutcome c = registry_.call(service, fn, arg, scheduler_, fuel_);
            for (const auto& t : c.run.trace) {
                out.trace.push_back(trace_line(t));
            }
            if (c.run.exhausted) {
                out.log.push_back("call " + text + ": out of fuel after "
                                  + std::to_string(c.run.steps) + " steps"
                                  + (c.run.deadlocked ? " (deadlock)" : ""));
            } else if (c.value) {
                out.log.push_back("call " + text + " = " + render_value(*c.value));
            } else {
                out.log.push_back("call " + text + ": no result");
            }
            last_call_ = std::move(c);
        });
    }

    void record(ScenarioResult& out, int line, const std::string& text, bool passed,
                std::string detail = {}) {
        out.assertions.push_back(Assertion{line, "expect " + text, passed, std::move(detail)});
    }

    void expect(ScenarioResult& out, const std::string& text, int line) {
        const auto w = detail::words(text);
        if (w.empty()) {
            usage(line, "empty expect");
        }
        if (w[0] == "error") {
            if (w.size() != 2) {
                usage(line, "expected expect error <Code>");
            }
            if (!pending_) {
                record(out, line, text, false, "no error occurred");
                return;
            }
            const std::string got{to_string(pending_->code())};
            record(out, line, text, got == w[1], got == w[1] ? "" : "got " + got);
            pending_.reset();
            return;
        }
        if (w[0] == "accepted" || w[0] == "reject") {
            if (!verdict_) {
                record(out, line, text, false, "no deploy or undeploy yet");
                return;
            }
            if (w[0] == "accepted") {
                record(out, line, text, verdict_->accepted,
                       verdict_->accepted ? "" : "rejected");
                return;
            }
            if (w.size() > 1 && w[1] == "accepted") {
                usage(line, "unexpected token after reject");
            }
            std::string missing;
            for (std::size_t i = 1; i < w.size(); ++i) {
                if (!verdict_->cited.contains(ElementKey{w[i]})) {
                    missing += " " + w[i];
                }
            }
            const bool ok = !verdict_->accepted && missing.empty();
            record(out, line, text, ok,
                   verdict_->accepted ? "accepted" : (missing.empty() ? "" : "not cited:" + missing));
            return;
        }
        if (w[0] == "payload") {
            expect_payload(out, text, line);
            return;
        }
        if (w[0].ends_with("-events")) {
            if (w.size() != 3 || w[1] != "=") {
                usage(line, "expected expect <kind>-events = <n>");
            }
            const std::string kind = w[0].substr(0, w[0].size() - 7);
            Event::Kind k{};
            if (kind == "rejected") {
                k = Event::Kind::Rejected;
            } else if (kind == "proxy") {
                k = Event::Kind::ProxyGenerated;
            } else if (kind == "invoked") {
                k = Event::Kind::Invoked;
            } else if (kind == "resolved") {
                k = Event::Kind::Resolved;
            } else if (kind == "step") {
                k = Event::Kind::ExprStep;
            } else {
                usage(line, "unknown event kind '" + kind + "'");
            }
            const std::uint64_t want = detail::parse_u64(w[2], line);
            if (!last_call_) {
                record(out, line, text, false, "no completed call");
                return;
            }
            const std::size_t got = last_call_->run.count(k);
            record(out, line, text, got == want, got == want ? "" : "got " + std::to_string(got));
            return;
        }
        Value want;
        try {
            want = parse_value(text);
        } catch (const Error&) {
            usage(line, "unknown expectation '" + text + "'");
        }
        if (!last_call_ || !last_call_->value) {
            record(out, line, text, false, "no call result");
            return;
        }
        const bool ok = *last_call_->value == want;
        record(out, line, text, ok, ok ? "" : "got " + render_value(*last_call_->value));
    }

    void expect_payload(ScenarioResult& out, const std::string& text, int line) {
        const auto eq = text.find('=');
        const auto w = detail::words(text.substr(0, eq == std::string::npos ? 0 : eq));
        if (eq == std::string::npos || w.size() != 3) {
            usage(line, "expected expect payload <fn> <key> = <literal>");
        }
        WireValue want;
        try {
            want = encode_value(parse_value(trim(text.substr(eq + 1))));
        } catch (const Error& e) {
            usage(line, std::string("bad literal: ") + e.what());
        }
        if (!last_call_) {
            record(out, line, text, false, "no completed call");
            return;
        }
        std::string seen;
        for (const auto& t : last_call_->run.trace) {
            if (t.event.kind != Event::Kind::Invoked || t.event.remote_fn != w[1]) {
                continue;
            }
            const WireValue request = parse_wire(t.event.payload);
            if (request.is_object() && request.contains(w[2]) && request[w[2]] == want) {
                record(out, line, text, true);
                return;
            }
            seen += " " + t.event.payload;
        }
        record(out, line, text, false, seen.empty() ? "no request to " + w[1] : "requests:" + seen);
    }

    Registry& registry_;
    ScenarioOptions options_;
    Scheduler scheduler_;
    std::uint64_t fuel_;
    std::optional<detail::LastVerdict> verdict_;
    std::optional<CallOutcome> last_call_;
    std::optional<Error> pending_;
    int pending_line_ = 0;
};

inline ScenarioResult run_scenario(Registry& registry, std::string_view script,
                                   ScenarioOptions options = {}) {
    ScenarioRunner runner(registry, std::move(options));
    return runner.run(script);
}

} // namespace cem
