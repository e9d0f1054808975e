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

// Value adaptation between compatible types, and proxy entry generation.

#pragma once

#include "cem/ast.hpp"

#include <string>
#include <variant>
#include <vector>

namespace cem {

/// Runtime shape of a first-order value. Unknown record members appear as
/// fields labelled `#<key>`, so a value carrying unknown members never
/// equals a static type.
inline Type runtime_type_of(const Value& v) {
    switch (v.kind) {
    case Value::Kind::Int:
        return Type::integer();
    case Value::Kind::Str:
        return Type::string();
    case Value::Kind::Record: {
        std::vector<Field> fields;
        for (const auto& f : v.known) {
            fields.push_back(Field{f.label, f.key, runtime_type_of(f.value)});
        }
        for (const auto& f : v.unknown) {
            fields.push_back(Field{"#" + f.key.id, f.key, runtime_type_of(f.value)});
        }
        return Type::record(std::move(fields));
    }
    case Value::Kind::Closure:
        break;
    }
    fail(ErrorCode::HigherOrderValue, "function values have no runtime shape");
}

/// The predetermined value of a base type: 0, "" or member-wise defaults.
inline Value default_value(const Type& t) {
    switch (t.kind) {
    case Type::Kind::Int:
        return Value::integer(0);
    case Type::Kind::String:
        return Value::string("");
    case Type::Kind::Record: {
        std::vector<KnownField> known;
        known.reserve(t.fields.size());
        for (const auto& f : t.fields) {
            known.push_back(KnownField{f.label, f.key, default_value(f.type)});
        }
        return Value::record(std::move(known));
    }
    case Type::Kind::Named:
        fail(ErrorCode::IrreconcilableShape, "default of unexpanded type " + render_type(t));
    case Type::Kind::Arrow:
        break;
    }
    fail(ErrorCode::IrreconcilableShape, "function types have no default value");
}

namespace detail {

Value convert_member(const Value& v, const Type& to);

inline Value convert_record(const Value& v, const Type& to) {
    if (!v.is_record()) {
        fail(ErrorCode::IrreconcilableShape,
             "expected a record for " + render_type(to) + ", found " + render_type(runtime_type_of(v)));
    }
    std::vector<KnownField> known;
    known.reserve(to.fields.size());
    for (const auto& f : to.fields) {
        const Value* m = v.member(f.key);
        if (m == nullptr) {
            known.push_back(KnownField{f.label, f.key, default_value(f.type)});
        } else if (runtime_type_of(*m) == f.type) {
            known.push_back(KnownField{f.label, f.key, *m});
        } else {
            known.push_back(KnownField{f.label, f.key, convert_member(*m, f.type)});
        }
    }
    std::vector<UnknownField> unknown;
    for (const auto& f : v.known) {
        if (to.field_by_key(f.key) == nullptr) {
            unknown.push_back(UnknownField{f.key, f.value});
        }
    }
    for (const auto& f : v.unknown) {
        if (to.field_by_key(f.key) == nullptr) {
            unknown.push_back(UnknownField{f.key, f.value});
        }
    }
    return Value::record(std::move(known), std::move(unknown));
}

// A member whose runtime shape differs from the target field type. Records
// recurse; a ground member of the wrong ground type can only sit under a key
// the consumer does not use, and is replaced by the target default.
inline Value convert_member(const Value& v, const Type& to) {
    if (to.is_record() && v.is_record()) {
        return convert_record(v, to);
    }
    if (to.is_arrow() || v.kind == Value::Kind::Closure) {
        fail(ErrorCode::HigherOrderValue, "function value inside a record");
    }
    return default_value(to);
}

} // namespace detail

/// Adapts a value of type `from` to type `to`. Identity when the types are
/// equal; functions are wrapped (parameter converted back, result forward);
/// records are rebuilt key by key, filling missing keys with defaults and
/// keeping every member the target does not know as an unknown field.
inline Value convert(const Value& v, const Type& from, const Type& to) {
    if (from == to) {
        return v;
    }
    if (from.is_arrow() && to.is_arrow()) {
        if (v.kind != Value::Kind::Closure) {
            fail(ErrorCode::IrreconcilableShape, "expected a function value");
        }
        const std::string x = "x";
        Expr call = ex::apply(ex::val(v), ex::convert(*to.param, *from.param, ex::var(x)));
        Expr body = ex::convert(*from.result, *to.result, std::move(call));
        return Value::closure(x, *to.param, std::move(body), v.context);
    }
    if (to.is_record()) {
        return detail::convert_record(v, to);
    }
    if (to.is_ground() && v.kind != Value::Kind::Closure && v.kind != Value::Kind::Record
        && runtime_type_of(v) == to) {
        return v;
    }
    fail(ErrorCode::IrreconcilableShape,
         "cannot adapt a value of type " + render_type(from) + " to " + render_type(to));
}

// ---------------------------------------------------------------------------
// Plans

struct KeepAction {
    ElementKey key;
};
struct RecurseAction {
    ElementKey key;
    Type from;
    Type to;
};
struct DefaultAction {
    ElementKey key;
    Type type;
};
struct PreserveUnknownAction {
    ElementKey key;
};
using AdapterAction = std::variant<KeepAction, RecurseAction, DefaultAction, PreserveUnknownAction>;

/// Static description of how `convert` treats each key of a record pair.
struct AdapterPlan {
    Type from;
    Type to;
    std::vector<AdapterAction> actions;
};

inline AdapterPlan plan_adapter(const Type& from, const Type& to) {
    AdapterPlan plan{from, to, {}};
    if (!from.is_record() || !to.is_record()) {
        return plan;
    }
    for (const auto& f : to.fields) {
        const Field* g = from.field_by_key(f.key);
        if (g == nullptr) {
            plan.actions.emplace_back(DefaultAction{f.key, f.type});
        } else if (g->type == f.type) {
            plan.actions.emplace_back(KeepAction{f.key});
        } else {
            plan.actions.emplace_back(RecurseAction{f.key, g->type, f.type});
        }
    }
    for (const auto& g : from.fields) {
        if (to.field_by_key(g.key) == nullptr) {
            plan.actions.emplace_back(PreserveUnknownAction{g.key});
        }
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Proxy generation

/// One proxy entry per value reference to `producer`, resolved by key in the
/// producer's signature. Type references need no entry.
inline std::vector<ValueProxy> gen_proxies(const std::string& producer,
                                           const std::vector<RefItem>& items,
                                           const Signature& phi) {
    std::vector<ValueProxy> out;
    for (const auto& item : items) {
        const auto* ref = std::get_if<ValueRef>(&item);
        if (ref == nullptr) {
            continue;
        }
        const SignatureEntry* e = phi.find(ref->key);
        if (e == nullptr || e->module != producer || e->kind != ElementKind::Value) {
            throw Error(ErrorCode::MissingEndpoint,
                        producer + " provides no function at key " + ref->key.id)
              .with_key(ref->key.id);
        }
        out.push_back(ValueProxy{ref->name, e->name, e->type});
    }
    return out;
}

} // namespace cem
