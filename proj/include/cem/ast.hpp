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

#include "cem/types.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace cem {

struct ExprNode;
struct Value;

/// Expressions are immutable trees shared by pointer.
using Expr = std::shared_ptr<const ExprNode>;

struct FieldInit {
    std::string label;
    ElementKey key;
    Expr value;
};

struct ExprNode {
    enum class Kind : std::uint8_t {
        Num,
        Str,
        Add,
        FunName,
        Var,
        Lambda,
        Apply,
        Record,
        Select,
        Update,
        // runtime-only forms
        Await,
        Convert,
        Val,
    };

    Kind kind = Kind::Num;
    std::int64_t num = 0;
    // string literal, function/variable name, lambda parameter, selected label
    std::string text;
    // lambda parameter type; conversion source
    Type type;
    // conversion target
    Type target;
    // Add: lhs + rhs. Apply: lhs(rhs). Lambda/Select/Update/Convert: lhs.
    Expr lhs;
    Expr rhs;
    std::vector<FieldInit> fields;
    ThreadId thread;
    std::shared_ptr<const Value> value;
};

struct KnownField;
struct UnknownField;

/// Runtime values. Records carry both known (labelled) and unknown
/// (key-only) fields; all keys in one record are distinct.
struct Value {
    enum class Kind : std::uint8_t { Int, Str, Closure, Record };

    Kind kind = Kind::Int;
    std::int64_t num = 0;
    // string payload, or closure parameter name
    std::string str;
    Type param_type;
    Expr body;
    // module whose definitions the closure body resolves function names in
    std::string context;
    std::vector<KnownField> known;
    std::vector<UnknownField> unknown;

    static Value integer(std::int64_t n);
    static Value string(std::string s);
    static Value closure(std::string param, Type param_type, Expr body, std::string context);
    static Value record(std::vector<KnownField> known, std::vector<UnknownField> unknown = {});

    bool is_record() const { return kind == Kind::Record; }

    /// `v.#k`: a known or unknown member by key.
    const Value* member(const ElementKey& k) const;
    const KnownField* known_by_label(const std::string& label) const;
    bool first_order() const;
};

struct KnownField {
    std::string label;
    ElementKey key;
    Value value;
};

struct UnknownField {
    ElementKey key;
    Value value;
};

inline Value Value::integer(std::int64_t n) {
    Value v;
    v.num = n;
    return v;
}

inline Value Value::string(std::string s) {
    Value v;
    v.kind = Kind::Str;
    v.str = std::move(s);
    return v;
}

inline Value Value::closure(std::string param, Type param_type, Expr body, std::string context) {
    Value v;
    v.kind = Kind::Closure;
    v.str = std::move(param);
    v.param_type = std::move(param_type);
    v.body = std::move(body);
    v.context = std::move(context);
    return v;
}

inline Value Value::record(std::vector<KnownField> known, std::vector<UnknownField> unknown) {
    Value v;
    v.kind = Kind::Record;
    v.known = std::move(known);
    v.unknown = std::move(unknown);
    return v;
}

inline const Value* Value::member(const ElementKey& k) const {
    for (const auto& f : known) {
        if (f.key == k) {
            return &f.value;
        }
    }
    for (const auto& f : unknown) {
        if (f.key == k) {
            return &f.value;
        }
    }
    return nullptr;
}

inline const KnownField* Value::known_by_label(const std::string& label) const {
    for (const auto& f : known) {
        if (f.label == label) {
            return &f;
        }
    }
    return nullptr;
}

inline bool Value::first_order() const {
    switch (kind) {
    case Kind::Closure:
        return false;
    case Kind::Record:
        return std::all_of(known.begin(), known.end(),
                           [](const KnownField& f) { return f.value.first_order(); })
               && std::all_of(unknown.begin(), unknown.end(),
                              [](const UnknownField& f) { return f.value.first_order(); });
    default:
        return true;
    }
}

/// Keys of a record value, known and unknown.
inline KeySet value_keys(const Value& v) {
    KeySet out;
    for (const auto& f : v.known) {
        out.insert(f.key);
    }
    for (const auto& f : v.unknown) {
        out.insert(f.key);
    }
    return out;
}

bool expr_equal(const Expr& a, const Expr& b);

/// Structural equality; record members are compared by key, ignoring order.
inline bool operator==(const Value& a, const Value& b) {
    if (a.kind != b.kind) {
        return false;
    }
    switch (a.kind) {
    case Value::Kind::Int:
        return a.num == b.num;
    case Value::Kind::Str:
        return a.str == b.str;
    case Value::Kind::Closure:
        return a.str == b.str && a.param_type == b.param_type && a.context == b.context
               && expr_equal(a.body, b.body);
    case Value::Kind::Record: {
        if (a.known.size() != b.known.size() || a.unknown.size() != b.unknown.size()) {
            return false;
        }
        for (const auto& f : a.known) {
            auto it = std::find_if(b.known.begin(), b.known.end(),
                                   [&](const KnownField& g) { return g.key == f.key; });
            if (it == b.known.end() || it->label != f.label || !(it->value == f.value)) {
                return false;
            }
        }
        for (const auto& f : a.unknown) {
            auto it = std::find_if(b.unknown.begin(), b.unknown.end(),
                                   [&](const UnknownField& g) { return g.key == f.key; });
            if (it == b.unknown.end() || !(it->value == f.value)) {
                return false;
            }
        }
        return true;
    }
    }
    return false;
}

namespace ex {

inline Expr make(ExprNode node) { return std::make_shared<const ExprNode>(std::move(node)); }

inline Expr num(std::int64_t n) {
    ExprNode e;
    e.kind = ExprNode::Kind::Num;
    e.num = n;
    return make(std::move(e));
}

inline Expr str(std::string s) {
    ExprNode e;
    e.kind = ExprNode::Kind::Str;
    e.text = std::move(s);
    return make(std::move(e));
}

inline Expr add(Expr a, Expr b) {
    ExprNode e;
    e.kind = ExprNode::Kind::Add;
    e.lhs = std::move(a);
    e.rhs = std::move(b);
    return make(std::move(e));
}

inline Expr fun(std::string name) {
    ExprNode e;
    e.kind = ExprNode::Kind::FunName;
    e.text = std::move(name);
    return make(std::move(e));
}

inline Expr var(std::string name) {
    ExprNode e;
    e.kind = ExprNode::Kind::Var;
    e.text = std::move(name);
    return make(std::move(e));
}

inline Expr lambda(std::string param, Type type, Expr body) {
    ExprNode e;
    e.kind = ExprNode::Kind::Lambda;
    e.text = std::move(param);
    e.type = std::move(type);
    e.lhs = std::move(body);
    return make(std::move(e));
}

inline Expr apply(Expr fn, Expr arg) {
    ExprNode e;
    e.kind = ExprNode::Kind::Apply;
    e.lhs = std::move(fn);
    e.rhs = std::move(arg);
    return make(std::move(e));
}

inline Expr record(std::vector<FieldInit> fields) {
    ExprNode e;
    e.kind = ExprNode::Kind::Record;
    e.fields = std::move(fields);
    return make(std::move(e));
}

inline Expr select(Expr target, std::string label) {
    ExprNode e;
    e.kind = ExprNode::Kind::Select;
    e.lhs = std::move(target);
    e.text = std::move(label);
    return make(std::move(e));
}

inline Expr update(Expr target, std::vector<FieldInit> fields) {
    ExprNode e;
    e.kind = ExprNode::Kind::Update;
    e.lhs = std::move(target);
    e.fields = std::move(fields);
    return make(std::move(e));
}

inline Expr await(ThreadId t) {
    ExprNode e;
    e.kind = ExprNode::Kind::Await;
    e.thread = t;
    return make(std::move(e));
}

inline Expr convert(Type from, Type to, Expr inner) {
    ExprNode e;
    e.kind = ExprNode::Kind::Convert;
    e.type = std::move(from);
    e.target = std::move(to);
    e.lhs = std::move(inner);
    return make(std::move(e));
}

inline Expr val(Value v) {
    ExprNode e;
    e.kind = ExprNode::Kind::Val;
    e.value = std::make_shared<const Value>(std::move(v));
    return make(std::move(e));
}

} // namespace ex

inline bool fields_equal(const std::vector<FieldInit>& a, const std::vector<FieldInit>& b) {
    if (a.size() != b.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].label != b[i].label || a[i].key != b[i].key
            || !expr_equal(a[i].value, b[i].value)) {
            return false;
        }
    }
    return true;
}

inline bool expr_equal(const Expr& a, const Expr& b) {
    if (a == b) {
        return true;
    }
    if (!a || !b || a->kind != b->kind) {
        return false;
    }
    using K = ExprNode::Kind;
    switch (a->kind) {
    case K::Num:
        return a->num == b->num;
    case K::Str:
    case K::FunName:
    case K::Var:
        return a->text == b->text;
    case K::Add:
    case K::Apply:
        return expr_equal(a->lhs, b->lhs) && expr_equal(a->rhs, b->rhs);
    case K::Lambda:
        return a->text == b->text && a->type == b->type && expr_equal(a->lhs, b->lhs);
    case K::Record:
        return fields_equal(a->fields, b->fields);
    case K::Select:
        return a->text == b->text && expr_equal(a->lhs, b->lhs);
    case K::Update:
        return expr_equal(a->lhs, b->lhs) && fields_equal(a->fields, b->fields);
    case K::Await:
        return a->thread == b->thread;
    case K::Convert:
        return a->type == b->type && a->target == b->target && expr_equal(a->lhs, b->lhs);
    case K::Val:
        return *a->value == *b->value;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Modules

struct TypeDef {
    ElementKey key;
    std::string name;
    Type body;
    SourceLoc loc;
};

struct ValueDef {
    ElementKey key;
    std::string name;
    Type type;
    Expr body;
    SourceLoc loc;
};

using Definition = std::variant<TypeDef, ValueDef>;

struct TypeRef {
    std::string producer;
    std::string name;
    ElementKey key;
    Type type;
};

struct ValueRef {
    std::string producer;
    std::string name;
    ElementKey key;
    Type type;
};

using RefItem = std::variant<TypeRef, ValueRef>;

struct Reference {
    std::string producer;
    std::vector<RefItem> items;
};

inline const ElementKey& key_of(const Definition& d) {
    return std::visit([](const auto& x) -> const ElementKey& { return x.key; }, d);
}
inline const std::string& name_of(const Definition& d) {
    return std::visit([](const auto& x) -> const std::string& { return x.name; }, d);
}
inline const ElementKey& key_of(const RefItem& r) {
    return std::visit([](const auto& x) -> const ElementKey& { return x.key; }, r);
}
inline const std::string& name_of(const RefItem& r) {
    return std::visit([](const auto& x) -> const std::string& { return x.name; }, r);
}
inline const Type& type_of(const RefItem& r) {
    return std::visit([](const auto& x) -> const Type& { return x.type; }, r);
}

struct Module {
    std::string name;
    std::vector<Reference> refs;
    std::vector<Definition> defs;

    const Reference* ref_for(const std::string& producer) const {
        for (const auto& r : refs) {
            if (r.producer == producer) {
                return &r;
            }
        }
        return nullptr;
    }

    const ValueDef* value_def(const std::string& fn) const {
        for (const auto& d : defs) {
            if (const auto* v = std::get_if<ValueDef>(&d); v && v->name == fn) {
                return v;
            }
        }
        return nullptr;
    }

    const ValueRef* value_ref(const std::string& fn) const {
        for (const auto& r : refs) {
            for (const auto& item : r.items) {
                if (const auto* v = std::get_if<ValueRef>(&item); v && v->name == fn) {
                    return v;
                }
            }
        }
        return nullptr;
    }
};

/// Σ for a module: local type definitions plus referenced types.
inline TypeScope module_type_scope(const Module& m) {
    TypeScope scope;
    for (const auto& d : m.defs) {
        if (const auto* t = std::get_if<TypeDef>(&d)) {
            if (!scope.emplace(t->key, TypeBinding{t->name, t->body}).second) {
                fail(ErrorCode::DuplicateKey, "type key " + t->key.id + " bound twice in " + m.name);
            }
        }
    }
    for (const auto& r : m.refs) {
        for (const auto& item : r.items) {
            if (const auto* t = std::get_if<TypeRef>(&item)) {
                if (!scope.emplace(t->key, TypeBinding{t->name, t->type}).second) {
                    fail(ErrorCode::DuplicateKey,
                         "type key " + t->key.id + " bound twice in " + m.name);
                }
            }
        }
    }
    return scope;
}

/// ρ: keys of the module's definitions.
inline KeySet producer_keys(const Module& m) {
    KeySet out;
    for (const auto& d : m.defs) {
        out.insert(key_of(d));
    }
    return out;
}

/// θ: keys of the module's reference items.
inline KeySet consumer_keys(const Module& m) {
    KeySet out;
    for (const auto& r : m.refs) {
        for (const auto& item : r.items) {
            out.insert(key_of(item));
        }
    }
    return out;
}

/// Checks the structural invariants of a module: unique definition keys and
/// names, one reference per producer, item producers consistent, boundary
/// types base or base -> base, no self references, and record invariants.
inline void validate_module(const Module& m) {
    std::set<ElementKey> keys;
    std::set<std::string> names;
    auto located = [](const Definition& d) {
        return std::visit([](const auto& x) { return x.loc; }, d);
    };
    for (const auto& d : m.defs) {
        try {
            if (!keys.insert(key_of(d)).second) {
                fail(ErrorCode::DuplicateKey,
                     "key " + key_of(d).id + " defined twice in module " + m.name);
            }
            if (!names.insert(name_of(d)).second) {
                fail(ErrorCode::DuplicateName,
                     "name " + name_of(d) + " defined twice in module " + m.name);
            }
            if (const auto* t = std::get_if<TypeDef>(&d)) {
                if (t->body.is_arrow() || contains_arrow(t->body)) {
                    fail(ErrorCode::ArrowAtBoundary,
                         "type definition " + t->name + " must be a base type");
                }
                validate_type(t->body);
            } else {
                const auto& v = std::get<ValueDef>(d);
                if (!v.type.is_arrow() || !is_boundary_type(v.type)) {
                    fail(ErrorCode::ArrowAtBoundary,
                         "function " + v.name + " must have a base -> base type");
                }
                validate_type(v.type);
            }
        } catch (Error& e) {
            e.with_loc(located(d)).with_key(key_of(d).id);
            throw;
        }
    }
    std::set<std::string> producers;
    for (const auto& r : m.refs) {
        if (r.producer == m.name) {
            fail(ErrorCode::SelfReference, "module " + m.name + " references itself");
        }
        if (!producers.insert(r.producer).second) {
            fail(ErrorCode::DuplicateName,
                 "module " + m.name + " has two references to " + r.producer);
        }
        for (const auto& item : r.items) {
            const auto& k = key_of(item);
            std::visit(
              [&](const auto& x) {
                  if (x.producer != r.producer) {
                      fail(ErrorCode::SyntaxError, "reference item " + x.name
                                                     + " names producer " + x.producer
                                                     + " inside ref " + r.producer);
                  }
              },
              item);
            if (!keys.insert(k).second) {
                throw Error(ErrorCode::DuplicateKey,
                            "key " + k.id + " appears twice in module " + m.name)
                  .with_key(k.id);
            }
            if (!names.insert(name_of(item)).second) {
                fail(ErrorCode::DuplicateName,
                     "name " + name_of(item) + " bound twice in module " + m.name);
            }
            if (std::holds_alternative<ValueRef>(item)) {
                const auto& t = type_of(item);
                if (!t.is_arrow() || !is_boundary_type(t)) {
                    fail(ErrorCode::ArrowAtBoundary,
                         "value reference " + name_of(item) + " must have a base -> base type");
                }
            } else if (contains_arrow(type_of(item))) {
                fail(ErrorCode::ArrowAtBoundary,
                     "type reference " + name_of(item) + " must be a base type");
            }
            validate_type(type_of(item));
        }
    }
}

// ---------------------------------------------------------------------------
// Signatures

enum class ElementKind : std::uint8_t { Type, Value };

struct SignatureEntry {
    std::string module;
    std::string name;
    ElementKind kind = ElementKind::Value;
    // fully expanded
    Type type;
};

inline bool operator==(const SignatureEntry& a, const SignatureEntry& b) {
    return a.module == b.module && a.name == b.name && a.kind == b.kind && a.type == b.type;
}

/// Φ: keys to fully expanded types, with owner metadata.
struct Signature {
    std::map<ElementKey, SignatureEntry> entries;

    const SignatureEntry* find(const ElementKey& k) const {
        auto it = entries.find(k);
        return it == entries.end() ? nullptr : &it->second;
    }
    bool empty() const { return entries.empty(); }
    std::size_t size() const { return entries.size(); }
    friend bool operator==(const Signature&, const Signature&) = default;
};

/// Φ_m: one fully expanded entry per definition of `m`.
inline Signature signature_of(const Module& m) {
    const TypeScope scope = module_type_scope(m);
    Signature sig;
    for (const auto& d : m.defs) {
        try {
            if (const auto* t = std::get_if<TypeDef>(&d)) {
                sig.entries[t->key] =
                  SignatureEntry{m.name, t->name, ElementKind::Type, expand_type(t->body, scope)};
            } else {
                const auto& v = std::get<ValueDef>(d);
                sig.entries[v.key] =
                  SignatureEntry{m.name, v.name, ElementKind::Value, expand_type(v.type, scope)};
            }
        } catch (Error& e) {
            e.with_key(key_of(d).id).with_service(m.name);
            throw;
        }
    }
    return sig;
}

// ---------------------------------------------------------------------------
// Services and systems

struct ValueProxy {
    std::string local;
    std::string remote;
    Type type;
};

inline bool operator==(const ValueProxy& a, const ValueProxy& b) {
    return a.local == b.local && a.remote == b.remote && a.type == b.type;
}

/// Consumer-side adapter table for one producer: either ready entries or an
/// outdated token carrying the producer's signature.
struct Proxy {
    enum class State : std::uint8_t { Ready, Outdated };

    State state = State::Ready;
    std::string producer;
    std::vector<ValueProxy> entries;
    Signature signature;
    DeployLabel label;

    static Proxy ready(std::string producer, std::vector<ValueProxy> entries, DeployLabel label) {
        Proxy p;
        p.producer = std::move(producer);
        p.entries = std::move(entries);
        p.label = std::move(label);
        return p;
    }
    static Proxy outdated(std::string producer, Signature sig, DeployLabel label) {
        Proxy p;
        p.state = State::Outdated;
        p.producer = std::move(producer);
        p.signature = std::move(sig);
        p.label = std::move(label);
        return p;
    }
    bool is_ready() const { return state == State::Ready; }
};

struct Thread {
    ThreadId id;
    Expr expr;
};

struct Service {
    Module module;
    std::vector<Proxy> proxies;
    DeployLabel label;
    std::vector<Thread> threads;

    const std::string& name() const { return module.name; }

    const Proxy* proxy_for(const std::string& producer) const {
        for (const auto& p : proxies) {
            if (p.producer == producer) {
                return &p;
            }
        }
        return nullptr;
    }
    Proxy* proxy_for(const std::string& producer) {
        for (auto& p : proxies) {
            if (p.producer == producer) {
                return &p;
            }
        }
        return nullptr;
    }
};

struct System {
    std::vector<Service> services;
    // monotonic allocators; a label or thread id is never reused
    std::uint64_t next_label = 1;
    std::uint64_t next_thread = 1;

    const Service* find(const std::string& name) const {
        for (const auto& s : services) {
            if (s.name() == name) {
                return &s;
            }
        }
        return nullptr;
    }
    Service* find(const std::string& name) {
        for (auto& s : services) {
            if (s.name() == name) {
                return &s;
            }
        }
        return nullptr;
    }

    DeployLabel fresh_label() { return DeployLabel{"l" + std::to_string(next_label++)}; }
    ThreadId fresh_thread() { return ThreadId{next_thread++}; }

    std::size_t thread_count() const {
        std::size_t n = 0;
        for (const auto& s : services) {
            n += s.threads.size();
        }
        return n;
    }
};

/// Φ_S: concatenation of the signatures of every deployed module.
inline Signature system_signature(const System& u) {
    Signature out;
    for (const auto& s : u.services) {
        for (auto& [k, e] : signature_of(s.module).entries) {
            out.entries.emplace(k, std::move(e));
        }
    }
    return out;
}

/// Numeric suffix of `l7`, `s3`, `k10`-style tokens; nullopt otherwise.
inline std::optional<std::uint64_t> numeric_suffix(const std::string& token) {
    if (token.size() < 2) {
        return std::nullopt;
    }
    std::uint64_t n = 0;
    for (std::size_t i = 1; i < token.size(); ++i) {
        if (token[i] < '0' || token[i] > '9') {
            return std::nullopt;
        }
        n = n * 10 + static_cast<std::uint64_t>(token[i] - '0');
    }
    return n;
}

} // namespace cem
