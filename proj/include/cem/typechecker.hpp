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

// Module, service and system typing.

#pragma once

#include "cem/compatibility.hpp"

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace cem {

namespace detail {

[[noreturn]] inline void rethrow_as(ErrorCode code, const Error& inner, const std::string& context) {
    Error out(code, context + ": " + std::string(to_string(inner.code())) + ": " + inner.what(),
              inner.loc());
    if (!inner.service().empty()) {
        out.with_service(inner.service());
    }
    if (!inner.key().empty()) {
        out.with_key(inner.key());
    }
    throw out;
}

} // namespace detail

/// C ⊢ M : P. Validates references against C restricted to the module's used
/// keys, typechecks every definition body, and returns the provided
/// environment stamped with `label`.
///
/// A reference item with key k is accepted when C provides k from the named
/// producer, with the same kind, and the consumer's declared type evolves to
/// the provided one under the keys the consumer uses.
inline GlobalEnv check_module(const GlobalEnv& c, const Module& m, const DeployLabel& label = {}) {
    try {
        validate_module(m);
        if (c.module_names().contains(m.name)) {
            fail(ErrorCode::NameCollision, "module name " + m.name + " is already provided");
        }
        const LocalEnv env = LocalEnv::of(m);

        for (const auto& r : m.refs) {
            const KeySet mu = used_keys(m, r.producer);
            for (const auto& item : r.items) {
                const ElementKey& k = key_of(item);
                const GlobalEntry* provided = c.find(k);
                if (provided == nullptr) {
                    throw Error(ErrorCode::UnresolvedReference,
                                name_of(item) + "@" + k.id + " from " + r.producer
                                  + " is not provided")
                      .with_key(k.id);
                }
                if (provided->module != r.producer) {
                    throw Error(ErrorCode::UnresolvedReference,
                                "key " + k.id + " is provided by " + provided->module + ", not "
                                  + r.producer)
                      .with_key(k.id);
                }
                const bool is_type = std::holds_alternative<TypeRef>(item);
                if (is_type != (provided->kind == ElementKind::Type)) {
                    throw Error(ErrorCode::RefIncompatible,
                                "key " + k.id + " refers to a "
                                  + (provided->kind == ElementKind::Type ? "type" : "function")
                                  + " in " + r.producer)
                      .with_key(k.id);
                }
                const Type declared = expand_type(type_of(item), env.sigma);
                if (auto bad = incompatibility(declared, provided->type, mu)) {
                    throw Error(ErrorCode::RefIncompatible,
                                name_of(item) + "@" + k.id + " expected " + render_type(declared)
                                  + ", found " + render_type(provided->type) + " (" + bad->reason
                                  + ")")
                      .with_key(k.id);
                }
            }
        }

        for (const auto& d : m.defs) {
            const auto* v = std::get_if<ValueDef>(&d);
            if (v == nullptr) {
                continue;
            }
            Type actual;
            try {
                actual = type_of_expr(env, nullptr, v->body);
            } catch (const Error& e) {
                Error out(ErrorCode::BodyTypeError,
                          v->name + ": " + std::string(to_string(e.code())) + ": " + e.what(),
                          v->loc);
                out.with_key(v->key.id);
                throw out;
            }
            const Type& declared = env.delta.at(v->name);
            if (!(actual == declared)) {
                throw Error(ErrorCode::BodyTypeError,
                            v->name + " is declared " + render_type(declared) + " but its body has type "
                              + render_type(actual),
                            v->loc)
                  .with_key(v->key.id);
            }
        }
        return provided_env(signature_of(m), label);
    } catch (Error& e) {
        e.with_service(m.name);
        throw;
    }
}

// ---------------------------------------------------------------------------
// Threads

namespace detail {

inline void collect_awaits(const Expr& e, std::vector<ThreadId>& out) {
    if (!e) {
        return;
    }
    switch (e->kind) {
    case ExprNode::Kind::Await:
        out.push_back(e->thread);
        return;
    case ExprNode::Kind::Record:
    case ExprNode::Kind::Update:
        for (const auto& f : e->fields) {
            collect_awaits(f.value, out);
        }
        break;
    default:
        break;
    }
    collect_awaits(e->lhs, out);
    collect_awaits(e->rhs, out);
}

} // namespace detail

/// Γ for a system, inferred by typing threads in await order. Also checks
/// the await pairing: every `s?` names an existing thread, no thread is
/// awaited twice, and awaits are acyclic.
inline ThreadEnv infer_thread_env(const System& u) {
    struct Entry {
        const Service* service = nullptr;
        Expr expr;
        std::vector<ThreadId> awaits;
    };
    std::map<ThreadId, Entry> threads;
    for (const auto& s : u.services) {
        for (const auto& t : s.threads) {
            Entry e{&s, t.expr, {}};
            detail::collect_awaits(t.expr, e.awaits);
            if (!threads.emplace(t.id, std::move(e)).second) {
                throw Error(ErrorCode::DuplicateName, "thread " + t.id.str() + " exists twice")
                  .with_service(s.name());
            }
        }
    }
    std::set<ThreadId> awaited;
    for (const auto& [id, e] : threads) {
        for (const auto& w : e.awaits) {
            if (!threads.contains(w)) {
                throw Error(ErrorCode::UnknownThread,
                            "thread " + id.str() + " awaits missing thread " + w.str())
                  .with_service(e.service->name());
            }
            if (!awaited.insert(w).second) {
                throw Error(ErrorCode::ThreadTypeError, "thread " + w.str() + " is awaited twice")
                  .with_service(e.service->name());
            }
        }
    }

    std::map<std::string, LocalEnv> envs;
    ThreadEnv gamma;
    std::set<ThreadId> visiting;
    std::function<void(const ThreadId&)> visit = [&](const ThreadId& id) {
        if (gamma.contains(id)) {
            return;
        }
        if (!visiting.insert(id).second) {
            throw Error(ErrorCode::CyclicAwait, "thread " + id.str() + " awaits itself");
        }
        const Entry& e = threads.at(id);
        for (const auto& w : e.awaits) {
            visit(w);
        }
        auto it = envs.find(e.service->name());
        if (it == envs.end()) {
            it = envs.emplace(e.service->name(), LocalEnv::of(e.service->module)).first;
        }
        try {
            gamma[id] = type_of_expr(it->second, &gamma, e.expr);
        } catch (const Error& err) {
            Error out(ErrorCode::ThreadTypeError,
                      id.str() + ": " + std::string(to_string(err.code())) + ": " + err.what());
            out.with_service(e.service->name());
            throw out;
        }
        visiting.erase(id);
    };
    for (const auto& [id, e] : threads) {
        visit(id);
    }
    return gamma;
}

// ---------------------------------------------------------------------------
// Services and systems

/// Label of the deployment currently providing `producer` in C, if any.
inline std::optional<DeployLabel> producer_label(const GlobalEnv& c, const std::string& producer) {
    for (const auto& [k, e] : c.entries) {
        if (e.module == producer) {
            return e.label;
        }
    }
    return std::nullopt;
}

/// C; Γ ⊢ service. Ready proxies stamped with the producer's current label
/// must match its current signature; stale or outdated proxies are accepted
/// as they are. Every thread must type at its Γ entry.
inline GlobalEnv check_service(const GlobalEnv& c, const ThreadEnv& gamma, const Service& s) {
    GlobalEnv provided = check_module(c, s.module, s.label);
    try {
        std::set<std::string> seen;
        for (const auto& p : s.proxies) {
            if (s.module.ref_for(p.producer) == nullptr || !seen.insert(p.producer).second) {
                fail(ErrorCode::ProxySignatureMismatch,
                     "proxy for " + p.producer + " does not match a single reference");
            }
            if (!p.is_ready()) {
                continue;
            }
            auto current = producer_label(c, p.producer);
            if (!current || *current != p.label) {
                continue;
            }
            std::set<std::string> locals;
            for (const auto& vp : p.entries) {
                const ValueRef* ref = s.module.value_ref(vp.local);
                if (ref == nullptr || ref->producer != p.producer || !locals.insert(vp.local).second) {
                    fail(ErrorCode::ProxySignatureMismatch,
                         "proxy entry " + vp.local + " is not a single reference to " + p.producer);
                }
                const GlobalEntry* remote = c.find(ref->key);
                if (remote == nullptr || remote->name != vp.remote || !(remote->type == vp.type)) {
                    throw Error(ErrorCode::ProxySignatureMismatch,
                                "proxy entry " + vp.local + " -> " + vp.remote + " : "
                                  + render_type(vp.type) + " disagrees with " + p.producer + " at "
                                  + p.label.id)
                      .with_key(ref->key.id);
                }
            }
        }
        for (const auto& r : s.module.refs) {
            if (s.proxy_for(r.producer) == nullptr) {
                fail(ErrorCode::ProxySignatureMismatch, "no proxy for producer " + r.producer);
            }
        }
        const LocalEnv env = LocalEnv::of(s.module);
        for (const auto& t : s.threads) {
            try {
                Type actual = type_of_expr(env, &gamma, t.expr);
                auto it = gamma.find(t.id);
                if (it == gamma.end() || !(it->second == actual)) {
                    fail(ErrorCode::ThreadTypeError,
                         "thread " + t.id.str() + " has type " + render_type(actual));
                }
            } catch (const Error& e) {
                if (e.code() == ErrorCode::ThreadTypeError) {
                    throw;
                }
                detail::rethrow_as(ErrorCode::ThreadTypeError, e, t.id.str());
            }
        }
    } catch (Error& e) {
        e.with_service(s.name());
        throw;
    }
    return provided;
}

/// Types a whole system: each service is checked against the environment
/// provided by all the others. Returns the combined provided environment.
inline GlobalEnv check_system(const System& u, const ThreadEnv* gamma = nullptr) {
    std::set<std::string> names;
    for (const auto& s : u.services) {
        if (!names.insert(s.name()).second) {
            throw Error(ErrorCode::NameCollision, "service " + s.name() + " deployed twice")
              .with_service(s.name());
        }
    }
    const ThreadEnv inferred = gamma ? ThreadEnv{} : infer_thread_env(u);
    const ThreadEnv& g = gamma ? *gamma : inferred;

    std::vector<GlobalEnv> provided;
    provided.reserve(u.services.size());
    GlobalEnv all;
    for (const auto& s : u.services) {
        try {
            provided.push_back(provided_env(signature_of(s.module), s.label));
            all.merge(provided.back());
        } catch (Error& e) {
            e.with_service(s.name());
            throw;
        }
    }
    for (std::size_t i = 0; i < u.services.size(); ++i) {
        GlobalEnv others;
        for (std::size_t j = 0; j < u.services.size(); ++j) {
            if (j != i) {
                others.merge(provided[j]);
            }
        }
        check_service(others, g, u.services[i]);
    }
    return all;
}

/// Checks a set of modules against each other (and an optional base
/// environment), as `check` does for a list of files.
inline GlobalEnv check_modules(const std::vector<Module>& modules, const GlobalEnv& base = {}) {
    std::vector<GlobalEnv> provided;
    GlobalEnv all = base;
    for (const auto& m : modules) {
        try {
            provided.push_back(provided_env(signature_of(m), {}));
            all.merge(provided.back());
        } catch (Error& e) {
            e.with_service(m.name);
            throw;
        }
    }
    for (std::size_t i = 0; i < modules.size(); ++i) {
        GlobalEnv others = base;
        for (std::size_t j = 0; j < modules.size(); ++j) {
            if (j != i) {
                others.merge(provided[j]);
            }
        }
        check_module(others, modules[i]);
    }
    return all;
}

} // namespace cem
