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

// Small-step evaluation and the system transition relation: local steps,
// the remote-call handshake (invoke, reject, proxy generation, resolve),
// and raw deploy / undeploy / start. Nothing here checks safety; see
// registry.hpp for the preflight gate.

#pragma once

#include "cem/adapter.hpp"
#include "cem/snapshot.hpp"
#include "cem/typing.hpp"
#include "cem/wire.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace cem {

// ---------------------------------------------------------------------------
// Expressions

inline bool is_value(const Expr& e) {
    switch (e->kind) {
    case ExprNode::Kind::Num:
    case ExprNode::Kind::Str:
    case ExprNode::Kind::Lambda:
    case ExprNode::Kind::Val:
        return true;
    default:
        return false;
    }
}

/// The value an expression in value form denotes. Lambdas close over
/// `context`, the module their function names resolve in.
inline Value to_value(const Expr& e, const std::string& context = {}) {
    switch (e->kind) {
    case ExprNode::Kind::Num:
        return Value::integer(e->num);
    case ExprNode::Kind::Str:
        return Value::string(e->text);
    case ExprNode::Kind::Lambda:
        return Value::closure(e->text, e->type, e->lhs, context);
    case ExprNode::Kind::Val:
        return *e->value;
    default:
        fail(ErrorCode::Stuck, "not a value: " + render_expr(e));
    }
}

/// Ground values become literals, everything else a value node.
inline Expr value_expr(Value v) {
    if (v.kind == Value::Kind::Int) {
        return ex::num(v.num);
    }
    if (v.kind == Value::Kind::Str) {
        return ex::str(std::move(v.str));
    }
    return ex::val(std::move(v));
}

namespace detail {

inline std::vector<FieldInit> subst_fields(const std::vector<FieldInit>& fields,
                                           const std::string& x, const Expr& v);

// Values substituted at runtime are closed, so no capture can occur.
inline Expr subst(const Expr& e, const std::string& x, const Expr& v) {
    using K = ExprNode::Kind;
    switch (e->kind) {
    case K::Num:
    case K::Str:
    case K::FunName:
    case K::Await:
    case K::Val:
        return e;
    case K::Var:
        return e->text == x ? v : e;
    case K::Lambda:
        if (e->text == x) {
            return e;
        }
        return ex::lambda(e->text, e->type, subst(e->lhs, x, v));
    case K::Add:
        return ex::add(subst(e->lhs, x, v), subst(e->rhs, x, v));
    case K::Apply:
        return ex::apply(subst(e->lhs, x, v), subst(e->rhs, x, v));
    case K::Record:
        return ex::record(subst_fields(e->fields, x, v));
    case K::Select:
        return ex::select(subst(e->lhs, x, v), e->text);
    case K::Update:
        return ex::update(subst(e->lhs, x, v), subst_fields(e->fields, x, v));
    case K::Convert:
        return ex::convert(e->type, e->target, subst(e->lhs, x, v));
    }
    return e;
}

inline std::vector<FieldInit> subst_fields(const std::vector<FieldInit>& fields,
                                           const std::string& x, const Expr& v) {
    std::vector<FieldInit> out;
    out.reserve(fields.size());
    for (const auto& f : fields) {
        out.push_back(FieldInit{f.label, f.key, subst(f.value, x, v)});
    }
    return out;
}

} // namespace detail

using Plug = std::function<Expr(Expr)>;

/// Outcome of one evaluation step of a thread expression.
struct StepResult {
    enum class Kind : std::uint8_t {
        Step,       // `next` is the reduct
        Value,      // already a value
        Blocked,    // waiting on `awaiting`
        RemoteCall, // redex `function(argument)` names a value reference
    };

    Kind kind = Kind::Value;
    Expr next;
    ThreadId awaiting;
    std::string function;
    Value argument;
    // rebuilds the whole expression around a replacement for the redex
    Plug plug;
};

namespace detail {

class Stepper {
public:
    explicit Stepper(const Module& m)
      : m_(m) {}

    StepResult step(const Expr& e) {
        using K = ExprNode::Kind;
        if (is_value(e)) {
            return StepResult{};
        }
        switch (e->kind) {
        case K::Add: {
            if (!is_value(e->lhs)) {
                return inside(e->lhs, [e](Expr x) { return ex::add(std::move(x), e->rhs); });
            }
            if (!is_value(e->rhs)) {
                return inside(e->rhs, [e](Expr x) { return ex::add(e->lhs, std::move(x)); });
            }
            const Value a = to_value(e->lhs);
            const Value b = to_value(e->rhs);
            if (a.kind == Value::Kind::Int && b.kind == Value::Kind::Int) {
                // wrap on overflow rather than invoke undefined behaviour
                auto sum = static_cast<std::uint64_t>(a.num) + static_cast<std::uint64_t>(b.num);
                return reduct(ex::num(static_cast<std::int64_t>(sum)));
            }
            if (a.kind == Value::Kind::Str && b.kind == Value::Kind::Str) {
                return reduct(ex::str(a.str + b.str));
            }
            stuck(e);
        }
        case K::FunName: {
            if (const ValueDef* d = m_.value_def(e->text)) {
                return reduct(d->body);
            }
            if (const ValueRef* r = m_.value_ref(e->text)) {
                // a remote function used as a value: eta-expand around the call
                const std::string x = fresh_param(r->name);
                return reduct(ex::lambda(x, *r->type.param, ex::apply(e, ex::var(x))));
            }
            stuck(e);
        }
        case K::Apply: {
            const bool remote = e->lhs->kind == K::FunName && m_.value_def(e->lhs->text) == nullptr
                                && m_.value_ref(e->lhs->text) != nullptr;
            if (!remote && !is_value(e->lhs)) {
                return inside(e->lhs, [e](Expr x) { return ex::apply(std::move(x), e->rhs); });
            }
            if (!is_value(e->rhs)) {
                return inside(e->rhs, [e](Expr x) { return ex::apply(e->lhs, std::move(x)); });
            }
            if (remote) {
                StepResult r;
                r.kind = StepResult::Kind::RemoteCall;
                r.function = e->lhs->text;
                r.argument = to_value(e->rhs, m_.name);
                r.plug = [](Expr x) { return x; };
                return r;
            }
            if (e->lhs->kind == K::Lambda) {
                return reduct(subst(e->lhs->lhs, e->lhs->text, e->rhs));
            }
            if (e->lhs->kind == K::Val && e->lhs->value->kind == Value::Kind::Closure) {
                const Value& c = *e->lhs->value;
                return reduct(subst(c.body, c.str, e->rhs));
            }
            stuck(e);
        }
        case K::Record: {
            for (std::size_t i = 0; i < e->fields.size(); ++i) {
                if (!is_value(e->fields[i].value)) {
                    return inside(e->fields[i].value, [e, i](Expr x) {
                        std::vector<FieldInit> fs = e->fields;
                        fs[i].value = std::move(x);
                        return ex::record(std::move(fs));
                    });
                }
            }
            std::vector<KnownField> known;
            for (const auto& f : e->fields) {
                known.push_back(KnownField{f.label, f.key, to_value(f.value, m_.name)});
            }
            return reduct(ex::val(Value::record(std::move(known))));
        }
        case K::Select: {
            if (!is_value(e->lhs)) {
                return inside(e->lhs, [e](Expr x) { return ex::select(std::move(x), e->text); });
            }
            const Value target = to_value(e->lhs);
            if (const KnownField* f = target.known_by_label(e->text)) {
                return reduct(value_expr(f->value));
            }
            stuck(e);
        }
        case K::Update: {
            if (!is_value(e->lhs)) {
                return inside(e->lhs, [e](Expr x) { return ex::update(std::move(x), e->fields); });
            }
            for (std::size_t i = 0; i < e->fields.size(); ++i) {
                if (!is_value(e->fields[i].value)) {
                    return inside(e->fields[i].value, [e, i](Expr x) {
                        std::vector<FieldInit> fs = e->fields;
                        fs[i].value = std::move(x);
                        return ex::update(e->lhs, std::move(fs));
                    });
                }
            }
            Value target = to_value(e->lhs);
            if (!target.is_record()) {
                stuck(e);
            }
            for (const auto& f : e->fields) {
                auto it = std::find_if(target.known.begin(), target.known.end(),
                                       [&](const KnownField& g) { return g.key == f.key; });
                if (it == target.known.end()) {
                    stuck(e);
                }
                it->value = to_value(f.value, m_.name);
            }
            return reduct(ex::val(std::move(target)));
        }
        case K::Await: {
            StepResult r;
            r.kind = StepResult::Kind::Blocked;
            r.awaiting = e->thread;
            return r;
        }
        case K::Convert: {
            if (!is_value(e->lhs)) {
                return inside(e->lhs, [e](Expr x) {
                    return ex::convert(e->type, e->target, std::move(x));
                });
            }
            return reduct(value_expr(convert(to_value(e->lhs, m_.name), e->type, e->target)));
        }
        default:
            stuck(e);
        }
    }

private:
    static StepResult reduct(Expr next) {
        StepResult r;
        r.kind = StepResult::Kind::Step;
        r.next = std::move(next);
        return r;
    }

    StepResult inside(const Expr& sub, Plug wrap) {
        StepResult r = step(sub);
        switch (r.kind) {
        case StepResult::Kind::Step:
            r.next = wrap(std::move(r.next));
            break;
        case StepResult::Kind::RemoteCall:
            r.plug = [inner = std::move(r.plug), wrap = std::move(wrap)](Expr x) {
                return wrap(inner(std::move(x)));
            };
            break;
        default:
            break;
        }
        return r;
    }

    [[noreturn]] static void stuck(const Expr& e) {
        fail(ErrorCode::Stuck, "no rule applies to " + render_expr(e));
    }

    static std::string fresh_param(const std::string& base) { return "_" + base; }

    const Module& m_;
};

} // namespace detail

/// One call-by-value step of `e`, resolving function names in `m`.
inline StepResult step_expr(const Module& m, const Expr& e) {
    detail::Stepper s(m);
    return s.step(e);
}

// ---------------------------------------------------------------------------
// Events and scheduling

struct Event {
    enum class Kind : std::uint8_t {
        ExprStep,
        Invoked,
        Resolved,
        Rejected,
        ProxyGenerated,
        Deployed,
        Undeployed,
        Started,
    };

    Kind kind = Kind::ExprStep;
    // acting service (consumer for handshake events)
    std::string service;
    std::string producer;
    std::string local_fn;
    std::string remote_fn;
    ThreadId thread;
    ThreadId new_thread;
    // Invoked: wire request; Resolved: wire response
    std::string payload;
    DeployLabel stale_label;
    DeployLabel label;
    std::vector<std::string> names;
    std::vector<std::string> labels;
};

inline std::string_view to_string(Event::Kind k) {
    switch (k) {
    case Event::Kind::ExprStep: return "ExprStep";
    case Event::Kind::Invoked: return "Invoked";
    case Event::Kind::Resolved: return "Resolved";
    case Event::Kind::Rejected: return "Rejected";
    case Event::Kind::ProxyGenerated: return "ProxyGenerated";
    case Event::Kind::Deployed: return "Deployed";
    case Event::Kind::Undeployed: return "Undeployed";
    case Event::Kind::Started: return "Started";
    }
    return "Unknown";
}

inline Json event_to_json(const Event& e) {
    Json j{{"event", to_string(e.kind)}};
    switch (e.kind) {
    case Event::Kind::ExprStep:
        j["service"] = e.service;
        j["thread"] = e.thread.str();
        break;
    case Event::Kind::Invoked:
        j["consumer"] = e.service;
        j["producer"] = e.producer;
        j["local"] = e.local_fn;
        j["remote"] = e.remote_fn;
        j["thread"] = e.new_thread.str();
        j["request"] = e.payload;
        break;
    case Event::Kind::Resolved:
        j["producer"] = e.producer;
        j["thread"] = e.thread.str();
        j["consumer"] = e.service;
        j["response"] = e.payload;
        break;
    case Event::Kind::Rejected:
        j["consumer"] = e.service;
        j["producer"] = e.producer;
        j["stale"] = e.stale_label.id;
        j["current"] = e.label.id;
        break;
    case Event::Kind::ProxyGenerated:
        j["consumer"] = e.service;
        j["producer"] = e.producer;
        j["label"] = e.label.id;
        break;
    case Event::Kind::Deployed:
        j["modules"] = e.names;
        j["labels"] = e.labels;
        break;
    case Event::Kind::Undeployed:
        j["modules"] = e.names;
        break;
    case Event::Kind::Started:
        j["service"] = e.service;
        j["thread"] = e.thread.str();
        break;
    }
    return j;
}

struct TraceEntry {
    std::uint64_t step = 0;
    Event event;
    // hash of the system state after the event
    std::string hash;
};

/// One NDJSON line per trace entry.
inline std::string trace_line(const TraceEntry& t) {
    Json j{{"step", t.step}};
    const Json body = event_to_json(t.event);
    for (const auto& [k, v] : body.items()) {
        j[k] = v;
    }
    j["state"] = t.hash;
    return j.dump();
}

struct SchedulerPolicy {
    enum class Mode : std::uint8_t { RoundRobin, SeededRandom };

    Mode mode = Mode::RoundRobin;
    std::uint64_t seed = 0;

    static SchedulerPolicy round_robin() { return {}; }
    static SchedulerPolicy seeded(std::uint64_t seed) { return {Mode::SeededRandom, seed}; }
};

/// Picks one of n enabled actions.
class Scheduler {
public:
    explicit Scheduler(SchedulerPolicy policy = {})
      : policy_(policy)
      , rng_(policy.seed) {}

    std::size_t pick(std::size_t n) {
        if (n <= 1) {
            return 0;
        }
        if (policy_.mode == SchedulerPolicy::Mode::RoundRobin) {
            return static_cast<std::size_t>(counter_++ % n);
        }
        return static_cast<std::size_t>(rng_() % n);
    }

    const SchedulerPolicy& policy() const { return policy_; }

private:
    SchedulerPolicy policy_;
    std::mt19937_64 rng_;
    std::uint64_t counter_ = 0;
};

// ---------------------------------------------------------------------------
// System transitions

/// An enabled transition. Handshake rules come before thread steps within
/// a service so enumeration order is stable.
struct Action {
    enum class Kind : std::uint8_t { GenProxy, ExprStep, Invoke, Reject, Resolve };

    Kind kind = Kind::ExprStep;
    std::size_t service = 0;
    std::size_t thread = 0;
    std::string producer;
    StepResult step;
};

namespace detail {

inline const Service* producer_service(const System& u, const std::string& name) {
    return u.find(name);
}

inline Expr replace_await(const Expr& e, const ThreadId& t, const Expr& v, bool& done) {
    using K = ExprNode::Kind;
    if (done || !e) {
        return e;
    }
    switch (e->kind) {
    case K::Await:
        if (e->thread == t) {
            done = true;
            return v;
        }
        return e;
    case K::Add:
    case K::Apply: {
        Expr l = replace_await(e->lhs, t, v, done);
        Expr r = replace_await(e->rhs, t, v, done);
        return e->kind == K::Add ? ex::add(l, r) : ex::apply(l, r);
    }
    case K::Select:
        return ex::select(replace_await(e->lhs, t, v, done), e->text);
    case K::Convert:
        return ex::convert(e->type, e->target, replace_await(e->lhs, t, v, done));
    case K::Record:
    case K::Update: {
        Expr target = e->kind == K::Update ? replace_await(e->lhs, t, v, done) : nullptr;
        std::vector<FieldInit> fs;
        for (const auto& f : e->fields) {
            fs.push_back(FieldInit{f.label, f.key, replace_await(f.value, t, v, done)});
        }
        return e->kind == K::Update ? ex::update(target, std::move(fs)) : ex::record(std::move(fs));
    }
    default:
        return e;
    }
}

// thread id -> (service index, thread index) of the thread awaiting it
inline std::map<ThreadId, std::pair<std::size_t, std::size_t>> awaiters(const System& u) {
    std::map<ThreadId, std::pair<std::size_t, std::size_t>> out;
    for (std::size_t si = 0; si < u.services.size(); ++si) {
        const auto& s = u.services[si];
        for (std::size_t ti = 0; ti < s.threads.size(); ++ti) {
            std::vector<ThreadId> ws;
            std::function<void(const Expr&)> walk = [&](const Expr& e) {
                if (!e) {
                    return;
                }
                if (e->kind == ExprNode::Kind::Await) {
                    ws.push_back(e->thread);
                }
                for (const auto& f : e->fields) {
                    walk(f.value);
                }
                walk(e->lhs);
                walk(e->rhs);
            };
            walk(s.threads[ti].expr);
            for (const auto& w : ws) {
                out[w] = {si, ti};
            }
        }
    }
    return out;
}

} // namespace detail

/// Every transition enabled in `u`, in a deterministic order.
inline std::vector<Action> enabled_actions(const System& u) {
    std::vector<Action> out;
    const auto waiting = detail::awaiters(u);
    for (std::size_t si = 0; si < u.services.size(); ++si) {
        const Service& s = u.services[si];
        for (const auto& p : s.proxies) {
            if (!p.is_ready()) {
                Action a;
                a.kind = Action::Kind::GenProxy;
                a.service = si;
                a.producer = p.producer;
                out.push_back(std::move(a));
            }
        }
        for (std::size_t ti = 0; ti < s.threads.size(); ++ti) {
            StepResult r;
            try {
                r = step_expr(s.module, s.threads[ti].expr);
            } catch (Error& e) {
                e.with_service(s.name());
                throw;
            }
            Action a;
            a.service = si;
            a.thread = ti;
            switch (r.kind) {
            case StepResult::Kind::Step:
                a.kind = Action::Kind::ExprStep;
                break;
            case StepResult::Kind::Value:
                if (!waiting.contains(s.threads[ti].id)) {
                    continue;
                }
                a.kind = Action::Kind::Resolve;
                break;
            case StepResult::Kind::Blocked:
                continue;
            case StepResult::Kind::RemoteCall: {
                const ValueRef* ref = s.module.value_ref(r.function);
                const Proxy* proxy = s.proxy_for(ref->producer);
                const Service* producer = detail::producer_service(u, ref->producer);
                if (proxy == nullptr || producer == nullptr) {
                    throw Error(ErrorCode::Stuck, "no deployed producer " + ref->producer + " for "
                                                    + r.function)
                      .with_service(s.name());
                }
                if (!proxy->is_ready()) {
                    continue;
                }
                a.kind = proxy->label == producer->label ? Action::Kind::Invoke
                                                         : Action::Kind::Reject;
                a.producer = ref->producer;
                break;
            }
            }
            a.step = std::move(r);
            out.push_back(std::move(a));
        }
    }
    return out;
}

/// Applies one action to `u` and returns the event it produces.
inline Event apply_action(System& u, const Action& a) {
    Service& s = u.services[a.service];
    Event ev;
    ev.service = s.name();
    switch (a.kind) {
    case Action::Kind::GenProxy: {
        Proxy* p = s.proxy_for(a.producer);
        const Service* producer = detail::producer_service(u, a.producer);
        if (producer == nullptr) {
            throw Error(ErrorCode::MissingEndpoint, "producer " + a.producer + " is not deployed")
              .with_service(s.name());
        }
        if (producer->label != p->label) {
            // the producer moved on while the token waited
            p->signature = signature_of(producer->module);
            p->label = producer->label;
        }
        std::vector<ValueProxy> entries;
        try {
            entries = gen_proxies(a.producer, s.module.ref_for(a.producer)->items, p->signature);
        } catch (Error& e) {
            e.with_service(s.name());
            throw;
        }
        DeployLabel label = p->label;
        *p = Proxy::ready(a.producer, std::move(entries), label);
        ev.kind = Event::Kind::ProxyGenerated;
        ev.producer = a.producer;
        ev.label = label;
        return ev;
    }
    case Action::Kind::ExprStep:
        s.threads[a.thread].expr = a.step.next;
        ev.kind = Event::Kind::ExprStep;
        ev.thread = s.threads[a.thread].id;
        return ev;
    case Action::Kind::Reject: {
        const Service* producer = detail::producer_service(u, a.producer);
        Proxy* p = s.proxy_for(a.producer);
        ev.kind = Event::Kind::Rejected;
        ev.producer = a.producer;
        ev.stale_label = p->label;
        ev.label = producer->label;
        ev.thread = s.threads[a.thread].id;
        *p = Proxy::outdated(a.producer, signature_of(producer->module), producer->label);
        return ev;
    }
    case Action::Kind::Invoke: {
        const ValueRef* ref = s.module.value_ref(a.step.function);
        const Proxy* p = s.proxy_for(a.producer);
        const ValueProxy* entry = nullptr;
        for (const auto& vp : p->entries) {
            if (vp.local == a.step.function) {
                entry = &vp;
            }
        }
        if (entry == nullptr) {
            throw Error(ErrorCode::MissingEndpoint,
                        "proxy for " + a.producer + " has no entry " + a.step.function)
              .with_service(s.name());
        }
        const Type declared = expand_type(ref->type, module_type_scope(s.module));
        const Value arg = convert(a.step.argument, *declared.param, *entry->type.param);
        const ThreadId t = u.fresh_thread();
        ev.kind = Event::Kind::Invoked;
        ev.producer = a.producer;
        ev.local_fn = entry->local;
        ev.remote_fn = entry->remote;
        ev.thread = s.threads[a.thread].id;
        ev.new_thread = t;
        ev.payload = wire_text(arg);
        s.threads[a.thread].expr =
          a.step.plug(ex::convert(*entry->type.result, *declared.result, ex::await(t)));
        Service* producer = u.find(a.producer);
        producer->threads.push_back(
          Thread{t, ex::apply(ex::fun(entry->remote), value_expr(arg))});
        return ev;
    }
    case Action::Kind::Resolve: {
        const ThreadId t = s.threads[a.thread].id;
        const Expr v = s.threads[a.thread].expr;
        const auto waiting = detail::awaiters(u);
        const auto [ci, ti] = waiting.at(t);
        bool done = false;
        Service& consumer = u.services[ci];
        consumer.threads[ti].expr = detail::replace_await(consumer.threads[ti].expr, t, v, done);
        ev.kind = Event::Kind::Resolved;
        ev.service = consumer.name();
        ev.producer = s.name();
        ev.thread = t;
        const Value result = to_value(v, s.name());
        ev.payload = result.first_order() ? wire_text(result) : render_value(result);
        auto& ts = u.services[a.service].threads;
        ts.erase(ts.begin() + static_cast<std::ptrdiff_t>(a.thread));
        return ev;
    }
    }
    return ev;
}

/// Applies one scheduler-chosen transition; nullopt when nothing is enabled.
inline std::optional<Event> step_system(System& u, Scheduler& scheduler) {
    std::vector<Action> actions = enabled_actions(u);
    if (actions.empty()) {
        return std::nullopt;
    }
    return apply_action(u, actions[scheduler.pick(actions.size())]);
}

// ---------------------------------------------------------------------------
// Deploy, undeploy, start

/// Installs modules without any check beyond quiescence: replaced services
/// keep their position, each module gets a fresh label, and every proxy
/// starts empty, stamped with the service's own label.
inline Event deploy(System& u, const std::vector<Module>& modules) {
    std::set<std::string> names;
    for (const auto& m : modules) {
        if (!names.insert(m.name).second) {
            throw Error(ErrorCode::DuplicateName, "module " + m.name + " appears twice in a deployment")
              .with_service(m.name);
        }
        if (const Service* old = u.find(m.name); old != nullptr && !old->threads.empty()) {
            throw Error(ErrorCode::NotQuiescent, m.name + " has running threads").with_service(m.name);
        }
    }
    Event ev;
    ev.kind = Event::Kind::Deployed;
    for (const auto& m : modules) {
        Service s;
        s.module = m;
        s.label = u.fresh_label();
        for (const auto& r : m.refs) {
            s.proxies.push_back(Proxy::ready(r.producer, {}, s.label));
        }
        ev.names.push_back(m.name);
        ev.labels.push_back(s.label.id);
        if (Service* old = u.find(m.name)) {
            *old = std::move(s);
        } else {
            u.services.push_back(std::move(s));
        }
    }
    return ev;
}

inline Event undeploy(System& u, const std::set<std::string>& names) {
    for (const auto& n : names) {
        const Service* s = u.find(n);
        if (s == nullptr) {
            throw Error(ErrorCode::UnknownService, "no deployed service " + n).with_service(n);
        }
        if (!s->threads.empty()) {
            throw Error(ErrorCode::NotQuiescent, n + " has running threads").with_service(n);
        }
    }
    std::erase_if(u.services, [&](const Service& s) { return names.contains(s.name()); });
    Event ev;
    ev.kind = Event::Kind::Undeployed;
    ev.names.assign(names.begin(), names.end());
    return ev;
}

inline ThreadId start(System& u, const std::string& service, Expr e) {
    Service* s = u.find(service);
    if (s == nullptr) {
        throw Error(ErrorCode::UnknownService, "no deployed service " + service).with_service(service);
    }
    const ThreadId t = u.fresh_thread();
    s->threads.push_back(Thread{t, std::move(e)});
    return t;
}

// ---------------------------------------------------------------------------
// Running

struct RunResult {
    std::vector<TraceEntry> trace;
    // values of finished threads nobody awaits, removed from the system
    std::map<ThreadId, Value> results;
    std::uint64_t steps = 0;
    // fuel ran out, or no transition is enabled while some thread is unfinished
    bool exhausted = false;
    bool deadlocked = false;

    std::size_t count(Event::Kind k) const {
        std::size_t n = 0;
        for (const auto& t : trace) {
            n += t.event.kind == k ? 1 : 0;
        }
        return n;
    }
};

using StateObserver = std::function<void(const System&, const Event&)>;

inline constexpr std::uint64_t kDefaultFuel = 10000;

/// Steps until no transition is enabled or `fuel` steps were taken. Finished
/// threads that nobody awaits are collected into `results`.
inline RunResult run_to_quiescence(System& u, Scheduler& scheduler,
                                   std::uint64_t fuel = kDefaultFuel,
                                   const StateObserver& observer = {},
                                   std::uint64_t first_step = 0) {
    RunResult out;
    for (;;) {
        if (out.steps >= fuel) {
            out.exhausted = !enabled_actions(u).empty();
            break;
        }
        std::optional<Event> ev = step_system(u, scheduler);
        if (!ev) {
            for (const auto& s : u.services) {
                for (const auto& t : s.threads) {
                    out.deadlocked = out.deadlocked || !is_value(t.expr);
                }
            }
            out.exhausted = out.deadlocked;
            break;
        }
        ++out.steps;
        out.trace.push_back(TraceEntry{first_step + out.steps, *ev, snapshot_hash(u)});
        if (observer) {
            observer(u, *ev);
        }
    }
    if (!out.exhausted) {
        const auto waiting = detail::awaiters(u);
        for (auto& s : u.services) {
            std::erase_if(s.threads, [&](const Thread& t) {
                if (!is_value(t.expr) || waiting.contains(t.id)) {
                    return false;
                }
                out.results.emplace(t.id, to_value(t.expr, s.name()));
                return true;
            });
        }
    }
    return out;
}

} // namespace cem
