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

#include "cem/error.hpp"

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace cem {

/// Identity of a program element or record field. Survives renames.
struct ElementKey {
    std::string id;

    friend auto operator<=>(const ElementKey&, const ElementKey&) = default;
};

/// Identity of one deployment of one service.
struct DeployLabel {
    std::string id;

    friend auto operator<=>(const DeployLabel&, const DeployLabel&) = default;
};

struct ThreadId {
    std::uint64_t value = 0;

    std::string str() const { return "s" + std::to_string(value); }
    friend auto operator<=>(const ThreadId&, const ThreadId&) = default;
};

using KeySet = std::set<ElementKey>;

inline ElementKey key(std::string id) { return ElementKey{std::move(id)}; }

struct Field;

/// Base types (int, string, key-annotated records, named types) and arrows.
/// Only the fields relevant to `kind` are meaningful.
struct Type {
    enum class Kind : std::uint8_t { Int, String, Record, Named, Arrow };

    Kind kind = Kind::Int;
    std::vector<Field> fields;
    std::string name;
    ElementKey key;
    std::shared_ptr<const Type> param;
    std::shared_ptr<const Type> result;

    static Type integer();
    static Type string();
    static Type record(std::vector<Field> fields);
    static Type named(std::string name, ElementKey key);
    static Type arrow(Type param, Type result);

    bool is_int() const { return kind == Kind::Int; }
    bool is_string() const { return kind == Kind::String; }
    bool is_record() const { return kind == Kind::Record; }
    bool is_named() const { return kind == Kind::Named; }
    bool is_arrow() const { return kind == Kind::Arrow; }
    bool is_ground() const { return is_int() || is_string(); }

    const Field* field_by_key(const ElementKey& k) const;
    const Field* field_by_label(const std::string& label) const;
};

struct Field {
    std::string label;
    ElementKey key;
    Type type;
};

inline Type Type::integer() { return Type{}; }

inline Type Type::string() {
    Type t;
    t.kind = Kind::String;
    return t;
}

inline Type Type::record(std::vector<Field> fields) {
    Type t;
    t.kind = Kind::Record;
    t.fields = std::move(fields);
    return t;
}

inline Type Type::named(std::string name, ElementKey key) {
    Type t;
    t.kind = Kind::Named;
    t.name = std::move(name);
    t.key = std::move(key);
    return t;
}

inline Type Type::arrow(Type param, Type result) {
    Type t;
    t.kind = Kind::Arrow;
    t.param = std::make_shared<const Type>(std::move(param));
    t.result = std::make_shared<const Type>(std::move(result));
    return t;
}

inline const Field* Type::field_by_key(const ElementKey& k) const {
    auto it = std::find_if(
      fields.begin(), fields.end(), [&](const Field& f) { return f.key == k; });
    return it == fields.end() ? nullptr : &*it;
}

inline const Field* Type::field_by_label(const std::string& label) const {
    auto it = std::find_if(fields.begin(), fields.end(), [&](const Field& f) {
        return f.label == label;
    });
    return it == fields.end() ? nullptr : &*it;
}

namespace detail {

inline bool types_equal(const Type& a, const Type& b, bool with_labels) {
    if (a.kind != b.kind) {
        return false;
    }
    switch (a.kind) {
    case Type::Kind::Int:
    case Type::Kind::String:
        return true;
    case Type::Kind::Named:
        return a.key == b.key && (!with_labels || a.name == b.name);
    case Type::Kind::Arrow:
        return types_equal(*a.param, *b.param, with_labels)
               && types_equal(*a.result, *b.result, with_labels);
    case Type::Kind::Record:
        if (a.fields.size() != b.fields.size()) {
            return false;
        }
        for (const auto& fa : a.fields) {
            const Field* fb = b.field_by_key(fa.key);
            if (fb == nullptr || (with_labels && fb->label != fa.label)
                || !types_equal(fa.type, fb->type, with_labels)) {
                return false;
            }
        }
        return true;
    }
    return false;
}

} // namespace detail

/// Structural equality. Record field order is ignored; fields are matched
/// by key and must agree on label and type.
inline bool operator==(const Type& a, const Type& b) {
    return detail::types_equal(a, b, true);
}

/// Equality that also ignores record labels (keys and shapes only).
inline bool same_shape(const Type& a, const Type& b) {
    return detail::types_equal(a, b, false);
}

inline bool contains_arrow(const Type& t) {
    switch (t.kind) {
    case Type::Kind::Arrow:
        return true;
    case Type::Kind::Record:
        return std::any_of(t.fields.begin(), t.fields.end(), [](const Field& f) {
            return contains_arrow(f.type);
        });
    default:
        return false;
    }
}

inline bool contains_named(const Type& t) {
    switch (t.kind) {
    case Type::Kind::Named:
        return true;
    case Type::Kind::Arrow:
        return contains_named(*t.param) || contains_named(*t.result);
    case Type::Kind::Record:
        return std::any_of(t.fields.begin(), t.fields.end(), [](const Field& f) {
            return contains_named(f.type);
        });
    default:
        return false;
    }
}

/// Base type, or base -> base. The only shapes allowed at module boundaries.
inline bool is_boundary_type(const Type& t) {
    if (t.is_arrow()) {
        return !contains_arrow(*t.param) && !contains_arrow(*t.result);
    }
    return !contains_arrow(t);
}

/// Every key mentioned in a type: named-type keys and record field keys.
inline void collect_keys(const Type& t, KeySet& out) {
    switch (t.kind) {
    case Type::Kind::Named:
        out.insert(t.key);
        break;
    case Type::Kind::Arrow:
        collect_keys(*t.param, out);
        collect_keys(*t.result, out);
        break;
    case Type::Kind::Record:
        for (const auto& f : t.fields) {
            out.insert(f.key);
            collect_keys(f.type, out);
        }
        break;
    default:
        break;
    }
}

/// Record-level invariants: field keys and labels pairwise distinct.
inline void validate_type(const Type& t) {
    switch (t.kind) {
    case Type::Kind::Arrow:
        validate_type(*t.param);
        validate_type(*t.result);
        break;
    case Type::Kind::Record: {
        std::set<ElementKey> keys;
        std::set<std::string> labels;
        for (const auto& f : t.fields) {
            if (!keys.insert(f.key).second) {
                fail(ErrorCode::DuplicateKey,
                     "record field key " + f.key.id + " appears twice");
            }
            if (!labels.insert(f.label).second) {
                fail(ErrorCode::DuplicateName,
                     "record field label " + f.label + " appears twice");
            }
            validate_type(f.type);
        }
        break;
    }
    default:
        break;
    }
}

inline std::string render_type(const Type& t) {
    switch (t.kind) {
    case Type::Kind::Int:
        return "int";
    case Type::Kind::String:
        return "string";
    case Type::Kind::Named:
        return t.name + "@" + t.key.id;
    case Type::Kind::Arrow: {
        std::string lhs = render_type(*t.param);
        if (t.param->is_arrow()) {
            lhs = "(" + lhs + ")";
        }
        return lhs + " -> " + render_type(*t.result);
    }
    case Type::Kind::Record: {
        std::string out = "{";
        for (std::size_t i = 0; i < t.fields.size(); ++i) {
            if (i > 0) {
                out += ", ";
            }
            const auto& f = t.fields[i];
            out += f.label + "@" + f.key.id + " : " + render_type(f.type);
        }
        return out + "}";
    }
    }
    return "?";
}

/// Σ: named types visible in a module, indexed by key.
struct TypeBinding {
    std::string name;
    Type body;
};
using TypeScope = std::map<ElementKey, TypeBinding>;

namespace detail {

inline Type expand(const Type& t, const TypeScope& scope, std::vector<ElementKey>& stack) {
    switch (t.kind) {
    case Type::Kind::Int:
    case Type::Kind::String:
        return t;
    case Type::Kind::Arrow:
        return Type::arrow(expand(*t.param, scope, stack), expand(*t.result, scope, stack));
    case Type::Kind::Record: {
        std::vector<Field> fields;
        fields.reserve(t.fields.size());
        for (const auto& f : t.fields) {
            fields.push_back(Field{f.label, f.key, expand(f.type, scope, stack)});
        }
        return Type::record(std::move(fields));
    }
    case Type::Kind::Named: {
        auto it = scope.find(t.key);
        if (it == scope.end()) {
            throw Error(ErrorCode::UnresolvedName,
                        "type " + t.name + "@" + t.key.id + " is not defined or referenced")
              .with_key(t.key.id);
        }
        if (it->second.name != t.name) {
            throw Error(ErrorCode::UnresolvedName,
                        "type key " + t.key.id + " is named " + it->second.name + ", not "
                          + t.name)
              .with_key(t.key.id);
        }
        if (std::find(stack.begin(), stack.end(), t.key) != stack.end()) {
            throw Error(ErrorCode::CyclicType,
                        "expansion of " + t.name + "@" + t.key.id + " does not terminate")
              .with_key(t.key.id);
        }
        stack.push_back(t.key);
        Type out = expand(it->second.body, scope, stack);
        stack.pop_back();
        return out;
    }
    }
    return t;
}

} // namespace detail

/// Replaces every named type by its definition. The result contains no
/// NamedType; recursive definitions raise CyclicType.
inline Type expand_type(const Type& t, const TypeScope& scope) {
    std::vector<ElementKey> stack;
    return detail::expand(t, scope, stack);
}

} // namespace cem
