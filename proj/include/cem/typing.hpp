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

// Expression typing. There is no subsumption: every well-typed expression
// has exactly one (fully expanded) type.

#pragma once

#include "cem/ast.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace cem {

/// Σ and Δ for one module: visible named types and the expanded types of
/// every function name (local definitions and value references).
struct LocalEnv {
    std::string module;
    TypeScope sigma;
    std::map<std::string, Type> delta;
    // function names bound by a value reference, with the reference's key
    std::map<std::string, ElementKey> ref_keys;

    static LocalEnv of(const Module& m) {
        LocalEnv env;
        env.module = m.name;
        env.sigma = module_type_scope(m);
        for (const auto& d : m.defs) {
            if (const auto* v = std::get_if<ValueDef>(&d)) {
                try {
                    env.delta[v->name] = expand_type(v->type, env.sigma);
                } catch (Error& e) {
                    e.with_key(v->key.id).with_loc(v->loc);
                    throw;
                }
            }
        }
        for (const auto& r : m.refs) {
            for (const auto& item : r.items) {
                if (const auto* v = std::get_if<ValueRef>(&item)) {
                    try {
                        env.delta[v->name] = expand_type(v->type, env.sigma);
                    } catch (Error& e) {
                        e.with_key(v->key.id);
                        throw;
                    }
                    env.ref_keys[v->name] = v->key;
                }
            }
        }
        return env;
    }
};

/// Γ: result type of every running thread.
using ThreadEnv = std::map<ThreadId, Type>;

/// Static type of a value: records expose their known fields only.
/// Closures are typed by the caller (they need an environment).
inline Type static_type_of_value(const Value& v) {
    switch (v.kind) {
    case Value::Kind::Int:
        return Type::integer();
    case Value::Kind::Str:
        return Type::string();
    case Value::Kind::Record: {
        std::vector<Field> fields;
        fields.reserve(v.known.size());
        for (const auto& f : v.known) {
            fields.push_back(Field{f.label, f.key, static_type_of_value(f.value)});
        }
        return Type::record(std::move(fields));
    }
    case Value::Kind::Closure:
        break;
    }
    fail(ErrorCode::ArgumentMismatch, "closure values have no environment-free type");
}

namespace detail {

class ExprTyper {
public:
    ExprTyper(const LocalEnv& env, const ThreadEnv* gamma, KeySet* touched)
      : env_(env)
      , gamma_(gamma)
      , touched_(touched) {}

    Type type_of(const Expr& e) {
        using K = ExprNode::Kind;
        switch (e->kind) {
        case K::Num:
            return Type::integer();
        case K::Str:
            return Type::string();
        case K::Add: {
            Type a = type_of(e->lhs);
            Type b = type_of(e->rhs);
            if (!(a.is_int() && b.is_int()) && !(a.is_string() && b.is_string())) {
                fail(ErrorCode::ArgumentMismatch,
                     "'+' needs int + int or string + string, got " + render_type(a) + " + "
                       + render_type(b));
            }
            return a;
        }
        case K::FunName: {
            auto it = env_.delta.find(e->text);
            if (it == env_.delta.end()) {
                fail(ErrorCode::UnboundName, "function " + e->text + " is not defined");
            }
            if (auto r = env_.ref_keys.find(e->text); r != env_.ref_keys.end()) {
                touch(r->second);
            }
            return it->second;
        }
        case K::Var:
            for (auto it = locals_.rbegin(); it != locals_.rend(); ++it) {
                if (it->first == e->text) {
                    return it->second;
                }
            }
            fail(ErrorCode::UnboundName, "variable " + e->text + " is not bound");
        case K::Lambda: {
            touch_annotation(e->type);
            Type param = expand_type(e->type, env_.sigma);
            locals_.emplace_back(e->text, param);
            Type body = type_of(e->lhs);
            locals_.pop_back();
            return Type::arrow(std::move(param), std::move(body));
        }
        case K::Apply: {
            Type fn = type_of(e->lhs);
            Type arg = type_of(e->rhs);
            if (!fn.is_arrow()) {
                fail(ErrorCode::ArgumentMismatch,
                     "applying a non-function of type " + render_type(fn));
            }
            if (!(*fn.param == arg)) {
                fail(ErrorCode::ArgumentMismatch, "argument of type " + render_type(arg)
                                                    + " where " + render_type(*fn.param)
                                                    + " is expected");
            }
            return *fn.result;
        }
        case K::Record: {
            std::vector<Field> fields;
            for (const auto& f : e->fields) {
                touch(f.key);
                fields.push_back(Field{f.label, f.key, type_of(f.value)});
            }
            Type t = Type::record(std::move(fields));
            validate_type(t);
            return t;
        }
        case K::Select: {
            Type target = type_of(e->lhs);
            if (!target.is_record()) {
                fail(ErrorCode::NonRecordSelect,
                     "selecting ." + e->text + " from " + render_type(target));
            }
            const Field* f = target.field_by_label(e->text);
            if (f == nullptr) {
                fail(ErrorCode::FieldNotFound,
                     "no field " + e->text + " in " + render_type(target));
            }
            touch(f->key);
            return f->type;
        }
        case K::Update: {
            Type target = type_of(e->lhs);
            if (!target.is_record()) {
                fail(ErrorCode::NonRecordSelect, "updating a non-record " + render_type(target));
            }
            KeySet seen;
            for (const auto& init : e->fields) {
                touch(init.key);
                if (!seen.insert(init.key).second) {
                    fail(ErrorCode::DuplicateKey, "key " + init.key.id + " updated twice");
                }
                const Field* f = target.field_by_key(init.key);
                if (f == nullptr || f->label != init.label) {
                    fail(ErrorCode::UpdateKeyMismatch,
                         "update of " + init.label + "@" + init.key.id + " does not name a field of "
                           + render_type(target));
                }
                Type v = type_of(init.value);
                if (!(v == f->type)) {
                    fail(ErrorCode::UpdateKeyMismatch, "update of " + init.label + "@"
                                                         + init.key.id + " with "
                                                         + render_type(v) + ", field has type "
                                                         + render_type(f->type));
                }
            }
            return target;
        }
        case K::Await: {
            if (gamma_ != nullptr) {
                if (auto it = gamma_->find(e->thread); it != gamma_->end()) {
                    return it->second;
                }
            }
            fail(ErrorCode::UnknownThread, "no thread " + e->thread.str());
        }
        case K::Convert: {
            Type inner = type_of(e->lhs);
            if (!(inner == e->type)) {
                fail(ErrorCode::ArgumentMismatch, "conversion from " + render_type(e->type)
                                                    + " applied to " + render_type(inner));
            }
            return e->target;
        }
        case K::Val: {
            const Value& v = *e->value;
            if (v.kind == Value::Kind::Closure) {
                locals_.emplace_back(v.str, v.param_type);
                Type body = type_of(v.body);
                locals_.pop_back();
                return Type::arrow(v.param_type, std::move(body));
            }
            return static_type_of_value(v);
        }
        }
        fail(ErrorCode::ArgumentMismatch, "unknown expression form");
    }

private:
    void touch(const ElementKey& k) {
        if (touched_ != nullptr) {
            touched_->insert(k);
        }
    }

    void touch_annotation(const Type& t) {
        if (touched_ != nullptr) {
            collect_keys(t, *touched_);
        }
    }

    const LocalEnv& env_;
    const ThreadEnv* gamma_;
    KeySet* touched_;
    std::vector<std::pair<std::string, Type>> locals_;
};

} // namespace detail

/// Σ; Δ; Γ ⊢ e : τ. If `touched` is given, every key the expression mentions
/// (annotations, record keys, selected fields, referenced functions) is
/// added to it.
inline Type type_of_expr(const LocalEnv& env, const ThreadEnv* gamma, const Expr& e,
                         KeySet* touched = nullptr) {
    detail::ExprTyper typer(env, gamma, touched);
    return typer.type_of(e);
}

inline Type type_of_expr(const LocalEnv& env, const Expr& e) {
    return type_of_expr(env, nullptr, e);
}

} // namespace cem
