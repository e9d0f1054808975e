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

// The deployment manager: a registry of deployed signatures and labels that
// gates every deploy and undeploy behind a preflight check, and drives
// calls through the runtime.

#pragma once

#include "cem/runtime.hpp"
#include "cem/typechecker.hpp"

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace cem {

struct HistoryEntry {
    std::string operation; // "deploy" or "undeploy"
    std::vector<std::string> modules;
    bool accepted = false;
    std::vector<std::string> labels;
    std::vector<std::string> diagnostics;
};

struct DeployOutcome {
    bool accepted = false;
    std::vector<DeployLabel> labels;
    Signature next_signature;
    CompatVerdict verdict;
    // typing and quiescence failures, one per offending module
    std::vector<Error> errors;
    std::optional<TraceEntry> event;

    /// Keys named by any violation or error.
    KeySet cited_keys() const {
        KeySet out = verdict.cited_keys();
        for (const auto& e : errors) {
            if (!e.key().empty()) {
                out.insert(ElementKey{e.key()});
            }
        }
        return out;
    }

    std::vector<std::string> diagnostics() const {
        std::vector<std::string> out;
        for (const auto& e : errors) {
            out.push_back(e.describe());
        }
        for (const auto& v : verdict.violations) {
            std::string line = "Incompatible key=" + v.key.id + " clause="
                               + std::string(to_string(v.clause));
            if (v.culprit) {
                line += " field=" + v.culprit->id;
            }
            out.push_back(line + ": " + v.reason);
        }
        return out;
    }
};

struct UndeployOutcome {
    bool accepted = false;
    // keys still consumed by remaining services, with the consumer
    std::vector<std::pair<ElementKey, std::string>> consumed;
    std::vector<Error> errors;
    std::optional<TraceEntry> event;

    std::vector<std::string> diagnostics() const {
        std::vector<std::string> out;
        for (const auto& e : errors) {
            out.push_back(e.describe());
        }
        for (const auto& [k, consumer] : consumed) {
            out.push_back("NotDisconnected key=" + k.id + ": still consumed by " + consumer);
        }
        return out;
    }
};

struct CallOutcome {
    ThreadId thread;
    std::optional<Value> value;
    RunResult run;
};

class Registry {
public:
    Registry() = default;
    explicit Registry(System u)
      : system_(std::move(u))
      , phi_(system_signature(system_)) {}

    const System& system() const { return system_; }
    const Signature& signature() const { return phi_; }
    const std::vector<HistoryEntry>& history() const { return history_; }
    std::uint64_t clock() const { return clock_; }

    /// Typechecks the batch against the system and checks module
    /// compatibility; deploys all of it or nothing.
    DeployOutcome preflight_deploy(const std::vector<Module>& modules) {
        DeployOutcome out;
        std::set<std::string> names;
        for (const auto& m : modules) {
            if (!names.insert(m.name).second) {
                out.errors.push_back(Error(ErrorCode::DuplicateName,
                                           "module " + m.name + " appears twice in the batch")
                                       .with_service(m.name));
            }
            if (const Service* s = system_.find(m.name); s != nullptr && !s->threads.empty()) {
                out.errors.push_back(
                  Error(ErrorCode::NotQuiescent, m.name + " has running threads").with_service(m.name));
            }
        }

        GlobalEnv base;
        for (const auto& s : system_.services) {
            if (!names.contains(s.name())) {
                base.merge(provided_env(signature_of(s.module), s.label));
            }
        }
        std::vector<std::optional<GlobalEnv>> provided;
        for (const auto& m : modules) {
            try {
                validate_module(m);
                provided.emplace_back(provided_env(signature_of(m), DeployLabel{}));
            } catch (Error& e) {
                e.with_service(m.name);
                out.errors.push_back(e);
                provided.emplace_back(std::nullopt);
            }
        }

        for (std::size_t i = 0; i < modules.size(); ++i) {
            if (!provided[i]) {
                continue;
            }
            try {
                GlobalEnv c = base;
                for (std::size_t j = 0; j < modules.size(); ++j) {
                    if (j != i && provided[j]) {
                        c.merge(*provided[j]);
                    }
                }
                check_module(c, modules[i]);
            } catch (Error& e) {
                e.with_service(modules[i].name);
                out.errors.push_back(e);
            }
        }

        const bool all_provided = std::all_of(provided.begin(), provided.end(),
                                              [](const auto& p) { return p.has_value(); });
        if (all_provided) {
            try {
                GlobalEnv p;
                for (const auto& pi : provided) {
                    p.merge(*pi);
                }
                GlobalEnv c = base;
                c.merge(p);
                out.verdict = module_compatibility(system_, phi_, modules, c, p);
                out.next_signature = out.verdict.next_signature;
            } catch (Error& e) {
                out.errors.push_back(e);
            }
        }

        out.accepted = all_provided && out.errors.empty() && out.verdict.ok();
        HistoryEntry h{"deploy", std::vector<std::string>(names.begin(), names.end()), out.accepted,
                       {}, out.diagnostics()};
        if (out.accepted) {
            Event ev = deploy(system_, modules);
            phi_ = out.next_signature;
            for (const auto& l : ev.labels) {
                out.labels.push_back(DeployLabel{l});
            }
            h.labels = ev.labels;
            out.event = TraceEntry{++clock_, std::move(ev), snapshot_hash(system_)};
        }
        history_.push_back(std::move(h));
        return out;
    }

    /// Removes the named services if they are quiescent and nothing that
    /// stays consumes their keys.
    UndeployOutcome preflight_undeploy(const std::set<std::string>& names) {
        UndeployOutcome out;
        bool known = true;
        for (const auto& n : names) {
            const Service* s = system_.find(n);
            if (s == nullptr) {
                out.errors.push_back(
                  Error(ErrorCode::UnknownService, "no deployed service " + n).with_service(n));
                known = false;
            } else if (!s->threads.empty()) {
                out.errors.push_back(Error(ErrorCode::NotQuiescent, n + " has running threads").with_service(n));
            }
        }
        if (known) {
            out.consumed = disconnection_violations(system_, names);
        }
        out.accepted = out.errors.empty() && out.consumed.empty();
        HistoryEntry h{"undeploy", std::vector<std::string>(names.begin(), names.end()),
                       out.accepted, {}, out.diagnostics()};
        if (out.accepted) {
            for (const auto& n : names) {
                for (const auto& k : producer_keys(system_.find(n)->module)) {
                    phi_.entries.erase(k);
                }
            }
            Event ev = undeploy(system_, names);
            out.event = TraceEntry{++clock_, std::move(ev), snapshot_hash(system_)};
        }
        history_.push_back(std::move(h));
        return out;
    }

    /// Starts `fn(arg)` in `service` and runs the system until it settles.
    CallOutcome call(const std::string& service, const std::string& fn, const Value& arg,
                     Scheduler& scheduler, std::uint64_t fuel = kDefaultFuel,
                     const StateObserver& observer = {}) {
        const Service* s = system_.find(service);
        if (s == nullptr) {
            throw Error(ErrorCode::UnknownService, "no deployed service " + service)
              .with_service(service);
        }
        const ValueDef* def = s->module.value_def(fn);
        if (def == nullptr) {
            throw Error(ErrorCode::UnknownFunction, service + " defines no function " + fn)
              .with_service(service);
        }
        const Type declared = expand_type(def->type, module_type_scope(s->module));
        if (!arg.first_order() || !(static_type_of_value(arg) == *declared.param)) {
            throw Error(ErrorCode::ArgumentTypeError,
                        fn + " expects " + render_type(*declared.param) + ", got "
                          + (arg.first_order() ? render_type(static_type_of_value(arg))
                                               : std::string("a function")))
              .with_service(service)
              .with_key(def->key.id);
        }
        CallOutcome out;
        out.thread = start(system_, service, ex::apply(ex::fun(fn), value_expr(arg)));
        Event started;
        started.kind = Event::Kind::Started;
        started.service = service;
        started.thread = out.thread;
        out.run.trace.push_back(TraceEntry{++clock_, started, snapshot_hash(system_)});
        RunResult run = run_to_quiescence(system_, scheduler, fuel, observer, clock_);
        clock_ += run.steps;
        out.run.steps = run.steps;
        out.run.exhausted = run.exhausted;
        out.run.deadlocked = run.deadlocked;
        out.run.results = std::move(run.results);
        for (auto& t : run.trace) {
            out.run.trace.push_back(std::move(t));
        }
        if (auto it = out.run.results.find(out.thread); it != out.run.results.end()) {
            out.value = it->second;
        }
        return out;
    }

    std::pair<Signature, DeployLabel> query_signature(const std::string& name) const {
        const Service* s = system_.find(name);
        if (s == nullptr) {
            throw Error(ErrorCode::UnknownService, "no deployed service " + name).with_service(name);
        }
        return {signature_of(s->module), s->label};
    }

    Json to_json() const {
        Json history = Json::array();
        for (const auto& h : history_) {
            history.push_back(Json{{"operation", h.operation},
                                   {"modules", h.modules},
                                   {"accepted", h.accepted},
                                   {"labels", h.labels},
                                   {"diagnostics", h.diagnostics}});
        }
        return Json{{"clock", clock_}, {"system", system_to_json(system_)}, {"history", history}};
    }

    static Registry from_json(const Json& j) {
        try {
            Registry r(system_from_json(j.at("system")));
            r.clock_ = j.at("clock").get<std::uint64_t>();
            for (const auto& h : j.at("history")) {
                r.history_.push_back(HistoryEntry{h.at("operation").get<std::string>(),
                                                  h.at("modules").get<std::vector<std::string>>(),
                                                  h.at("accepted").get<bool>(),
                                                  h.at("labels").get<std::vector<std::string>>(),
                                                  h.at("diagnostics").get<std::vector<std::string>>()});
            }
            return r;
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::Io, std::string("malformed state: ") + e.what());
        }
    }

private:
    System system_;
    Signature phi_;
    std::vector<HistoryEntry> history_;
    std::uint64_t clock_ = 0;
};

} // namespace cem
