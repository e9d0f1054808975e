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

#pragma once

#include "cem/typing.hpp"

#include <algorithm>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace cem {

// ---------------------------------------------------------------------------
// Global environments (C and P)

struct GlobalEntry {
    std::string module;
    std::string name;
    ElementKind kind = ElementKind::Value;
    Type type;
    DeployLabel label;
};

/// Keys to ⟨module, name, expanded type, label⟩.
struct GlobalEnv {
    std::map<ElementKey, GlobalEntry> entries;

    const GlobalEntry* find(const ElementKey& k) const {
        auto it = entries.find(k);
        return it == entries.end() ? nullptr : &it->second;
    }

    void add(const ElementKey& k, GlobalEntry e) {
        if (auto it = entries.find(k); it != entries.end()) {
            throw Error(ErrorCode::DuplicateKey,
                        "key " + k.id + " is defined by both " + it->second.module + " and "
                          + e.module)
              .with_key(k.id);
        }
        entries.emplace(k, std::move(e));
    }

    void merge(const GlobalEnv& other) {
        for (const auto& [k, e] : other.entries) {
            add(k, e);
        }
    }

    std::set<std::string> module_names() const {
        std::set<std::string> out;
        for (const auto& [k, e] : entries) {
            out.insert(e.module);
        }
        return out;
    }

    /// The entry for function `name` of `module`, if any.
    const GlobalEntry* find_value(const std::string& module, const std::string& name) const {
        for (const auto& [k, e] : entries) {
            if (e.module == module && e.name == name && e.kind == ElementKind::Value) {
                return &e;
            }
        }
        return nullptr;
    }

    Signature signature() const {
        Signature sig;
        for (const auto& [k, e] : entries) {
            sig.entries[k] = SignatureEntry{e.module, e.name, e.kind, e.type};
        }
        return sig;
    }
};

inline GlobalEnv provided_env(const Signature& sig, const DeployLabel& label) {
    GlobalEnv env;
    for (const auto& [k, e] : sig.entries) {
        env.entries[k] = GlobalEntry{e.module, e.name, e.kind, e.type, label};
    }
    return env;
}

// ---------------------------------------------------------------------------
// Type compatibility

/// Why `tau` does not evolve to `sigma`: the innermost offending record key
/// (if the failure is inside a record) and a readable reason.
struct Incompatibility {
    std::optional<ElementKey> culprit;
    std::string reason;
};

/// τ ⇝^μ σ with a witness on failure. Ground types relate only to
/// themselves; arrows are contravariant in the parameter; every record field
/// of τ whose key is in μ must survive in σ (any label) at a related type.
inline std::optional<Incompatibility> incompatibility(const Type& tau, const Type& sigma,
                                                      const KeySet& mu) {
    if (tau.is_arrow() && sigma.is_arrow()) {
        if (auto bad = incompatibility(*sigma.param, *tau.param, mu)) {
            bad->reason = "parameter: " + bad->reason;
            return bad;
        }
        if (auto bad = incompatibility(*tau.result, *sigma.result, mu)) {
            bad->reason = "result: " + bad->reason;
            return bad;
        }
        return std::nullopt;
    }
    if (tau.is_record() && sigma.is_record()) {
        for (const auto& f : tau.fields) {
            if (!mu.contains(f.key)) {
                continue;
            }
            const Field* g = sigma.field_by_key(f.key);
            if (g == nullptr) {
                return Incompatibility{f.key, "used field " + f.label + "@" + f.key.id + " is missing"};
            }
            if (auto bad = incompatibility(f.type, g->type, mu)) {
                if (!bad->culprit) {
                    bad->culprit = f.key;
                }
                bad->reason = f.label + "@" + f.key.id + ": " + bad->reason;
                return bad;
            }
        }
        return std::nullopt;
    }
    if (tau.is_ground() && tau == sigma) {
        return std::nullopt;
    }
    return Incompatibility{std::nullopt,
                           render_type(tau) + " does not evolve to " + render_type(sigma)};
}

inline bool type_compatible(const Type& tau, const Type& sigma, const KeySet& mu) {
    return !incompatibility(tau, sigma, mu).has_value();
}

// ---------------------------------------------------------------------------
// Used keys

namespace detail {

inline void collect_named_keys(const Type& t, KeySet& out) {
    switch (t.kind) {
    case Type::Kind::Named:
        out.insert(t.key);
        break;
    case Type::Kind::Arrow:
        collect_named_keys(*t.param, out);
        collect_named_keys(*t.result, out);
        break;
    case Type::Kind::Record:
        for (const auto& f : t.fields) {
            collect_named_keys(f.type, out);
        }
        break;
    default:
        break;
    }
}

// Untyped fallback for bodies that do not typecheck: every key written in
// the body, without the selections (which need types to resolve).
inline void scan_expr_keys(const Expr& e, const LocalEnv& env, KeySet& out) {
    if (!e) {
        return;
    }
    using K = ExprNode::Kind;
    switch (e->kind) {
    case K::FunName:
        if (auto it = env.ref_keys.find(e->text); it != env.ref_keys.end()) {
            out.insert(it->second);
        }
        break;
    case K::Lambda:
        collect_keys(e->type, out);
        break;
    case K::Record:
    case K::Update:
        for (const auto& f : e->fields) {
            out.insert(f.key);
            scan_expr_keys(f.value, env, out);
        }
        break;
    default:
        break;
    }
    scan_expr_keys(e->lhs, env, out);
    scan_expr_keys(e->rhs, env, out);
}

} // namespace detail

/// μ for one producer: keys originating from `producer` (its referenced
/// elements and every key inside their declared types) that the module's
/// definitions actually mention.
inline KeySet used_keys(const Module& m, const std::string& producer) {
    const Reference* ref = m.ref_for(producer);
    if (ref == nullptr) {
        return {};
    }
    KeySet origin;
    std::map<ElementKey, const ValueRef*> value_refs;
    for (const auto& item : ref->items) {
        origin.insert(key_of(item));
        collect_keys(type_of(item), origin);
        if (const auto* v = std::get_if<ValueRef>(&item)) {
            value_refs[v->key] = v;
        }
    }

    std::optional<LocalEnv> env;
    try {
        env = LocalEnv::of(m);
    } catch (const Error&) {
        env.reset();
    }
    KeySet found;
    for (const auto& d : m.defs) {
        if (const auto* t = std::get_if<TypeDef>(&d)) {
            collect_keys(t->body, found);
            continue;
        }
        const auto& v = std::get<ValueDef>(d);
        collect_keys(v.type, found);
        if (!env) {
            continue;
        }
        KeySet touched;
        try {
            type_of_expr(*env, nullptr, v.body, &touched);
        } catch (const Error&) {
            touched.clear();
            detail::scan_expr_keys(v.body, *env, touched);
        }
        found.insert(touched.begin(), touched.end());
    }
    // calling a referenced function uses the named types of its signature
    for (const auto& [k, v] : value_refs) {
        if (found.contains(k)) {
            detail::collect_named_keys(v->type, found);
        }
    }
    KeySet out;
    std::set_intersection(found.begin(), found.end(), origin.begin(), origin.end(),
                          std::inserter(out, out.end()));
    return out;
}

/// μ of a module over all its producers.
inline KeySet used_keys(const Module& m) {
    KeySet out;
    for (const auto& r : m.refs) {
        KeySet part = used_keys(m, r.producer);
        out.insert(part.begin(), part.end());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Module compatibility against a deployed system

enum class Clause : std::uint8_t { Provider, Consumer };

inline std::string_view to_string(Clause c) {
    return c == Clause::Provider ? "provider" : "consumer";
}

struct CompatViolation {
    ElementKey key;
    Clause clause = Clause::Provider;
    std::optional<Type> expected;
    std::optional<Type> found;
    std::string reason;
    // innermost record key responsible, when the mismatch is inside a type
    std::optional<ElementKey> culprit;
};

struct CompatVerdict {
    std::vector<CompatViolation> violations;
    Signature next_signature;

    bool ok() const { return violations.empty(); }

    /// One violation per line: key, clause, expected, found, reason.
    std::string report() const {
        std::string out;
        for (const auto& v : violations) {
            out += v.key.id + "\t" + std::string(to_string(v.clause)) + "\t"
                   + (v.expected ? render_type(*v.expected) : "-") + "\t"
                   + (v.found ? render_type(*v.found) : "-") + "\t" + v.reason + "\n";
        }
        return out;
    }

    /// Every key a violation points at, including culprits inside types.
    KeySet cited_keys() const {
        KeySet out;
        for (const auto& v : violations) {
            out.insert(v.key);
            if (v.culprit) {
                out.insert(*v.culprit);
            }
        }
        return out;
    }
};

/// Whether `incoming` (already checked, giving P under C) may replace or join
/// the deployed services of `u`, whose signature is `phi`.
///
/// Provider side: every key produced by the incoming modules, or by the
/// deployed versions they replace, that the remaining services consume must
/// still be provided by the same module, and its old type must evolve to the
/// new one under the remaining services' used keys. Consumer side: every key
/// the incoming modules consume must be provided, and C(k) ⇝ Φ_S(k) under
/// the incoming modules' used keys.
inline CompatVerdict module_compatibility(const System& u, const Signature& phi,
                                          const std::vector<Module>& incoming,
                                          const GlobalEnv& c, const GlobalEnv& p) {
    CompatVerdict verdict;
    std::set<std::string> names;
    for (const auto& m : incoming) {
        names.insert(m.name);
    }

    KeySet rho;
    KeySet theta_in;
    KeySet mu_in;
    for (const auto& m : incoming) {
        KeySet pk = producer_keys(m);
        rho.insert(pk.begin(), pk.end());
        KeySet ck = consumer_keys(m);
        theta_in.insert(ck.begin(), ck.end());
        KeySet uk = used_keys(m);
        mu_in.insert(uk.begin(), uk.end());
    }
    KeySet mu_rest;
    std::map<std::string, KeySet> mu_of;
    // key -> (consumer, producer named by its reference)
    std::map<ElementKey, std::vector<std::pair<std::string, std::string>>> consumed_by;
    for (const auto& s : u.services) {
        if (names.contains(s.name())) {
            KeySet pk = producer_keys(s.module);
            rho.insert(pk.begin(), pk.end());
            continue;
        }
        for (const auto& r : s.module.refs) {
            for (const auto& item : r.items) {
                consumed_by[key_of(item)].emplace_back(s.name(), r.producer);
            }
        }
        KeySet uk = used_keys(s.module);
        mu_rest.insert(uk.begin(), uk.end());
        mu_of[s.name()] = std::move(uk);
    }

    for (const auto& k : rho) {
        auto it = consumed_by.find(k);
        if (it == consumed_by.end()) {
            continue;
        }
        const GlobalEntry* now = p.find(k);
        const SignatureEntry* before = phi.find(k);
        CompatViolation v;
        v.key = k;
        v.clause = Clause::Provider;
        if (before != nullptr) {
            v.expected = before->type;
        }
        if (now != nullptr) {
            v.found = now->type;
        }
        bool moved = false;
        for (const auto& [consumer, producer] : it->second) {
            CompatViolation w = v;
            if (now == nullptr) {
                w.reason = "key " + k.id + " is consumed by " + consumer + " but no longer provided";
            } else if (now->module != producer) {
                w.reason = "key " + k.id + " moved from " + producer + " to " + now->module
                           + " while " + consumer + " consumes it";
            } else {
                continue;
            }
            moved = true;
            verdict.violations.push_back(std::move(w));
        }
        if (moved || before == nullptr) {
            continue;
        }
        // one check under the union of the remaining services' used keys
        if (auto bad = incompatibility(before->type, now->type, mu_rest)) {
            std::string users;
            for (const auto& [consumer, producer] : it->second) {
                if (bad->culprit && mu_of[consumer].contains(*bad->culprit)
                    && users.find(" " + consumer + ",") == std::string::npos) {
                    users += " " + consumer + ",";
                }
            }
            if (!users.empty()) {
                users.pop_back();
                users = " (used by" + users + ")";
            }
            v.culprit = bad->culprit;
            v.reason = "change breaks remaining consumers" + users + ": " + bad->reason;
            verdict.violations.push_back(std::move(v));
        }
    }

    // a key introduced by the batch must not belong to a service that stays
    for (const auto& [k, e] : p.entries) {
        if (const SignatureEntry* before = phi.find(k);
            before != nullptr && !names.contains(before->module)) {
            CompatViolation v;
            v.key = k;
            v.clause = Clause::Provider;
            v.expected = before->type;
            v.found = e.type;
            v.reason = "key " + k.id + " is already defined by " + before->module;
            verdict.violations.push_back(std::move(v));
        }
    }

    for (const auto& k : theta_in) {
        const GlobalEntry* provided = c.find(k);
        CompatViolation v;
        v.key = k;
        v.clause = Clause::Consumer;
        if (provided == nullptr) {
            v.reason = "consumed key " + k.id + " is not provided";
            verdict.violations.push_back(std::move(v));
            continue;
        }
        const SignatureEntry* before = phi.find(k);
        if (before == nullptr) {
            continue;
        }
        if (auto bad = incompatibility(provided->type, before->type, mu_in)) {
            v.expected = provided->type;
            v.found = before->type;
            v.culprit = bad->culprit;
            v.reason = bad->reason;
            verdict.violations.push_back(std::move(v));
        }
    }

    for (const auto& [k, e] : phi.entries) {
        if (!rho.contains(k)) {
            verdict.next_signature.entries.emplace(k, e);
        }
    }
    for (const auto& [k, e] : p.entries) {
        verdict.next_signature.entries[k] = SignatureEntry{e.module, e.name, e.kind, e.type};
    }
    return verdict;
}

// ---------------------------------------------------------------------------
// Disconnected sub-systems

/// Keys produced by the named services and consumed by a remaining one,
/// paired with the consumer. Empty iff the named part is disconnected.
inline std::vector<std::pair<ElementKey, std::string>>
disconnection_violations(const System& u, const std::set<std::string>& names) {
    KeySet rho;
    for (const auto& n : names) {
        const Service* s = u.find(n);
        if (s == nullptr) {
            throw Error(ErrorCode::UnknownService, "no deployed service " + n).with_service(n);
        }
        KeySet pk = producer_keys(s->module);
        rho.insert(pk.begin(), pk.end());
    }
    std::vector<std::pair<ElementKey, std::string>> out;
    for (const auto& s : u.services) {
        if (names.contains(s.name())) {
            continue;
        }
        for (const auto& k : consumer_keys(s.module)) {
            if (rho.contains(k)) {
                out.emplace_back(k, s.name());
            }
        }
    }
    return out;
}

inline bool disconnected(const System& u, const std::set<std::string>& names) {
    return disconnection_violations(u, names).empty();
}

} // namespace cem
