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

// Shared fixtures, generators and independent oracles for the test suites
// and the acceptance runner. Nothing here calls into the code under test to
// decide an expected outcome.

#pragma once

#include "cem/cem.hpp"

#include <filesystem>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <string>
#include <vector>

#ifndef CEM_SAMPLES_DIR
#define CEM_SAMPLES_DIR "samples"
#endif

namespace cem::testing {

using Rng = std::mt19937_64;

inline std::filesystem::path samples_dir() { return CEM_SAMPLES_DIR; }

inline std::string sample_text(const std::string& name) { return read_file(samples_dir() / name); }

inline Module sample_module(const std::string& file) { return parse_module(sample_text(file)); }

inline std::vector<Module> sample_modules(std::initializer_list<std::string> files) {
    std::vector<Module> out;
    for (const auto& f : files) {
        out.push_back(sample_module(f));
    }
    return out;
}

inline Type product_of(const Module& m) {
    for (const auto& d : m.defs) {
        if (const auto* t = std::get_if<TypeDef>(&d); t && t->key == key("k1")) {
            return t->body;
        }
    }
    for (const auto& r : m.refs) {
        for (const auto& item : r.items) {
            if (const auto* t = std::get_if<TypeRef>(&item); t && t->key == key("k1")) {
                return t->type;
            }
        }
    }
    throw std::runtime_error("module has no Product");
}

/// v1 trio deployed, then optionally more batches; every batch must pass.
inline Registry registry_after(std::initializer_list<std::vector<std::string>> batches) {
    Registry r;
    for (const auto& b : batches) {
        std::vector<Module> ms;
        for (const auto& f : b) {
            ms.push_back(sample_module(f));
        }
        if (!r.preflight_deploy(ms).accepted) {
            throw std::runtime_error("fixture batch rejected: " + b.front());
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// The compatibility relation, transcribed clause by clause: τ ⇝ σ iff
//   both ground and equal; or
//   both arrows, parameter contravariant and result covariant; or
//   both records and every (r, k, β1) of τ with k in μ has some (r', k, β2)
//   in σ with β1 ⇝ β2.

inline bool by_definition(const Type& tau, const Type& sigma, const KeySet& mu) {
    if (tau.kind == Type::Kind::Int || tau.kind == Type::Kind::String) {
        return sigma.kind == tau.kind;
    }
    if (tau.kind == Type::Kind::Arrow) {
        return sigma.kind == Type::Kind::Arrow && by_definition(*sigma.param, *tau.param, mu)
               && by_definition(*tau.result, *sigma.result, mu);
    }
    if (tau.kind == Type::Kind::Record) {
        if (sigma.kind != Type::Kind::Record) {
            return false;
        }
        for (const Field& f : tau.fields) {
            if (mu.count(f.key) == 0) {
                continue;
            }
            bool witness = false;
            for (const Field& g : sigma.fields) {
                if (g.key == f.key && by_definition(f.type, g.type, mu)) {
                    witness = true;
                }
            }
            if (!witness) {
                return false;
            }
        }
        return true;
    }
    return false;
}

/// Flat record types with at most `max_fields` fields over `keys`, each field
/// int or string, plus int and string themselves. Field order follows the
/// key list; labels are `L<key>` or, with `relabel`, `R<key>`.
inline std::vector<Type> flat_type_space(const std::vector<std::string>& keys, std::size_t max_fields,
                                         bool relabel) {
    std::vector<Type> out{Type::integer(), Type::string()};
    const std::size_t n = keys.size();
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        std::vector<std::string> chosen;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                chosen.push_back(keys[i]);
            }
        }
        if (chosen.size() > max_fields) {
            continue;
        }
        for (std::uint32_t types = 0; types < (1u << chosen.size()); ++types) {
            std::vector<Field> fields;
            for (std::size_t i = 0; i < chosen.size(); ++i) {
                fields.push_back(Field{(relabel ? "R" : "L") + chosen[i], key(chosen[i]),
                                       (types & (1u << i)) ? Type::string() : Type::integer()});
            }
            out.push_back(Type::record(std::move(fields)));
        }
    }
    return out;
}

inline std::vector<KeySet> all_subsets(const std::vector<std::string>& keys) {
    std::vector<KeySet> out;
    for (std::uint32_t mask = 0; mask < (1u << keys.size()); ++mask) {
        KeySet s;
        for (std::size_t i = 0; i < keys.size(); ++i) {
            if (mask & (1u << i)) {
                s.insert(key(keys[i]));
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Used keys, by a textual scan of the rendered definitions: every `@k<N>`
// written there, every referenced function whose name occurs as an
// identifier (plus the named types of its declared type), and every field
// whose label follows a `.` selection. The result is cut down to keys that
// come from the references. Assumes labels are unique across the module's
// record types, which the generators guarantee.

inline KeySet used_keys_by_scan(const Module& m) {
    Module defs_only{m.name, {}, m.defs};
    const std::string text = render_module(defs_only);

    KeySet written;
    static const std::regex key_re("@(k[0-9]+)");
    for (auto it = std::sregex_iterator(text.begin(), text.end(), key_re); it != std::sregex_iterator(); ++it) {
        written.insert(key((*it)[1].str()));
    }
    std::set<std::string> idents;
    static const std::regex ident_re("[A-Za-z_][A-Za-z0-9_]*");
    for (auto it = std::sregex_iterator(text.begin(), text.end(), ident_re); it != std::sregex_iterator(); ++it) {
        idents.insert(it->str());
    }
    std::set<std::string> selected;
    static const std::regex sel_re("\\.([A-Za-z_][A-Za-z0-9_]*)");
    for (auto it = std::sregex_iterator(text.begin(), text.end(), sel_re); it != std::sregex_iterator(); ++it) {
        selected.insert((*it)[1].str());
    }

    KeySet origin;
    std::map<std::string, ElementKey> label_keys;
    std::function<void(const Type&)> walk = [&](const Type& t) {
        switch (t.kind) {
        case Type::Kind::Named:
            origin.insert(t.key);
            break;
        case Type::Kind::Record:
            for (const auto& f : t.fields) {
                origin.insert(f.key);
                label_keys[f.label] = f.key;
                walk(f.type);
            }
            break;
        case Type::Kind::Arrow:
            walk(*t.param);
            walk(*t.result);
            break;
        default:
            break;
        }
    };
    KeySet found = written;
    for (const auto& r : m.refs) {
        for (const auto& item : r.items) {
            origin.insert(key_of(item));
            walk(type_of(item));
        }
    }
    for (const auto& r : m.refs) {
        for (const auto& item : r.items) {
            if (const auto* v = std::get_if<ValueRef>(&item); v && idents.count(v->name)) {
                found.insert(v->key);
                std::function<void(const Type&)> named = [&](const Type& t) {
                    if (t.is_named()) {
                        found.insert(t.key);
                    } else if (t.is_arrow()) {
                        named(*t.param);
                        named(*t.result);
                    } else if (t.is_record()) {
                        for (const auto& f : t.fields) {
                            named(f.type);
                        }
                    }
                };
                named(v->type);
            }
        }
    }
    for (const auto& l : selected) {
        if (auto it = label_keys.find(l); it != label_keys.end()) {
            found.insert(it->second);
        }
    }
    KeySet out;
    for (const auto& k : found) {
        if (origin.count(k)) {
            out.insert(k);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Random first-order types and values

struct KeyPool {
    std::uint64_t next = 100;
    ElementKey fresh() { return key("k" + std::to_string(next++)); }
    std::string label() { return "f" + std::to_string(next); }
};

inline Type random_base_type(Rng& rng, KeyPool& keys, int depth, std::size_t max_fields = 4) {
    const int pick = static_cast<int>(rng() % (depth > 0 ? 3 : 2));
    if (pick == 0) {
        return Type::integer();
    }
    if (pick == 1) {
        return Type::string();
    }
    std::vector<Field> fields;
    const std::size_t n = rng() % (max_fields + 1);
    for (std::size_t i = 0; i < n; ++i) {
        ElementKey k = keys.fresh();
        fields.push_back(Field{"F" + k.id.substr(1), k, random_base_type(rng, keys, depth - 1, max_fields)});
    }
    return Type::record(std::move(fields));
}

inline Type random_record_type(Rng& rng, KeyPool& keys, int depth, std::size_t max_fields = 4) {
    Type t;
    do {
        t = random_base_type(rng, keys, depth, max_fields);
    } while (!t.is_record());
    return t;
}

inline std::string random_string(Rng& rng) {
    static const char* const kWords[] = {"", "HDD", "2TB", "a\"b", "x\\y", "Pro", "line\nbreak", "é"};
    return kWords[rng() % (sizeof kWords / sizeof *kWords)];
}

/// A closed value of type `t` with no unknown fields.
inline Value random_value(Rng& rng, const Type& t) {
    switch (t.kind) {
    case Type::Kind::Int:
        return Value::integer(static_cast<std::int64_t>(rng() % 2001) - 1000);
    case Type::Kind::String:
        return Value::string(random_string(rng));
    case Type::Kind::Record: {
        std::vector<KnownField> known;
        for (const auto& f : t.fields) {
            known.push_back(KnownField{f.label, f.key, random_value(rng, f.type)});
        }
        return Value::record(std::move(known));
    }
    default:
        throw std::runtime_error("no values of this type");
    }
}

/// A value of type `t` that may also carry unknown members at any depth.
inline Value random_value_with_unknowns(Rng& rng, const Type& t, KeyPool& keys) {
    Value v = random_value(rng, t);
    std::function<void(Value&)> sprinkle = [&](Value& x) {
        if (!x.is_record()) {
            return;
        }
        for (auto& f : x.known) {
            sprinkle(f.value);
        }
        if (rng() % 2 == 0) {
            Type extra = random_base_type(rng, keys, 1, 2);
            Value ev = random_value(rng, extra);
            // unknown members carry no labels, nested records included
            std::function<Value(const Value&)> strip = [&](const Value& y) {
                if (!y.is_record()) {
                    return y;
                }
                std::vector<UnknownField> u;
                for (const auto& f : y.known) {
                    u.push_back(UnknownField{f.key, strip(f.value)});
                }
                return Value::record({}, std::move(u));
            };
            x.unknown.push_back(UnknownField{keys.fresh(), strip(ev)});
        }
    };
    sprinkle(v);
    return v;
}

/// Keys of every record field anywhere in `t`.
inline KeySet field_keys(const Type& t) {
    KeySet out;
    collect_keys(t, out);
    return out;
}

/// Applies compatible edits under `mu`: relabel any field, add fresh fields,
/// drop fields whose key is not in `mu`, reorder, and recurse into nested
/// records. Ground types stay as they are.
inline Type evolve_compatible(Rng& rng, const Type& t, const KeySet& mu, KeyPool& keys) {
    if (!t.is_record()) {
        return t;
    }
    std::vector<Field> out;
    for (const auto& f : t.fields) {
        if (!mu.count(f.key) && rng() % 4 == 0) {
            continue;
        }
        Field g = f;
        if (rng() % 3 == 0) {
            g.label = "N" + f.key.id.substr(1);
        }
        g.type = evolve_compatible(rng, f.type, mu, keys);
        out.push_back(std::move(g));
    }
    if (rng() % 2 == 0) {
        ElementKey k = keys.fresh();
        out.push_back(Field{"A" + k.id.substr(1), k, random_base_type(rng, keys, 1, 2)});
    }
    std::shuffle(out.begin(), out.end(), rng);
    return Type::record(std::move(out));
}

/// Round-trip expectation for v'' = convert(convert(v', b', b), b, b'), computed
/// by walking the types: v'' equals v' on v''s keys, and each record level
/// additionally holds, as unknown members, the keys of `b` that `b'` lacks
/// with the default of their `b` type.
inline bool round_trip_matches(const Value& original, const Value& back, const Type& b, const Type& b2) {
    if (!b2.is_record()) {
        return original == back;
    }
    if (!back.is_record() || back.known.size() != original.known.size()) {
        return false;
    }
    for (const auto& f : original.known) {
        const KnownField* g = nullptr;
        for (const auto& x : back.known) {
            if (x.key == f.key) {
                g = &x;
            }
        }
        if (g == nullptr || g->label != f.label) {
            return false;
        }
        const Field* in_b = b.is_record() ? b.field_by_key(f.key) : nullptr;
        const Field* in_b2 = b2.field_by_key(f.key);
        if (in_b != nullptr && in_b->type.is_record() && in_b2->type.is_record()) {
            if (!round_trip_matches(f.value, g->value, in_b->type, in_b2->type)) {
                return false;
            }
        } else if (!(f.value == g->value)) {
            return false;
        }
    }
    std::map<ElementKey, Value> expected_unknown;
    if (b.is_record()) {
        for (const auto& f : b.fields) {
            if (b2.field_by_key(f.key) == nullptr) {
                expected_unknown.emplace(f.key, default_value(f.type));
            }
        }
    }
    for (const auto& f : original.unknown) {
        expected_unknown.emplace(f.key, f.value);
    }
    if (back.unknown.size() != expected_unknown.size()) {
        return false;
    }
    for (const auto& u : back.unknown) {
        auto it = expected_unknown.find(u.key);
        if (it == expected_unknown.end() || !(it->second == u.value)) {
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Random modules for the parser round trip. Bodies need not typecheck; the
// module only has to satisfy the structural invariants.

inline Expr random_expr(Rng& rng, KeyPool& keys, int depth, const std::vector<std::string>& names) {
    const int choice = static_cast<int>(rng() % (depth > 0 ? 10 : 4));
    switch (choice) {
    case 0:
        return ex::num(static_cast<std::int64_t>(rng() % 200) - 100);
    case 1:
        return ex::str(random_string(rng));
    case 2:
        return ex::var(names[rng() % names.size()]);
    case 3:
        return ex::fun("Fn" + std::to_string(rng() % 3));
    case 4:
        return ex::add(random_expr(rng, keys, depth - 1, names), random_expr(rng, keys, depth - 1, names));
    case 5: {
        auto inner = names;
        inner.push_back("v" + std::to_string(rng() % 5));
        return ex::lambda(inner.back(), random_base_type(rng, keys, 1, 2),
                          random_expr(rng, keys, depth - 1, inner));
    }
    case 6:
        return ex::apply(random_expr(rng, keys, depth - 1, names), random_expr(rng, keys, depth - 1, names));
    case 7: {
        std::vector<FieldInit> fields;
        const std::size_t n = rng() % 3;
        for (std::size_t i = 0; i < n; ++i) {
            ElementKey k = keys.fresh();
            fields.push_back(FieldInit{"F" + k.id.substr(1), k, random_expr(rng, keys, depth - 1, names)});
        }
        return ex::record(std::move(fields));
    }
    case 8:
        return ex::select(random_expr(rng, keys, depth - 1, names), "F" + std::to_string(rng() % 9));
    default: {
        ElementKey k = keys.fresh();
        return ex::update(random_expr(rng, keys, depth - 1, names),
                          {FieldInit{"F" + k.id.substr(1), k, random_expr(rng, keys, depth - 1, names)}});
    }
    }
}

inline Module random_module(Rng& rng, int index) {
    KeyPool keys{static_cast<std::uint64_t>(1 + index * 1000)};
    Module m;
    m.name = "M" + std::to_string(index);
    const std::size_t nrefs = rng() % 3;
    for (std::size_t r = 0; r < nrefs; ++r) {
        Reference ref{"P" + std::to_string(r), {}};
        const std::size_t n = rng() % 3;
        for (std::size_t i = 0; i < n; ++i) {
            ElementKey k = keys.fresh();
            if (rng() % 2 == 0) {
                ref.items.push_back(TypeRef{ref.producer, "T" + k.id.substr(1), k, random_base_type(rng, keys, 2)});
            } else {
                ref.items.push_back(ValueRef{ref.producer, "g" + k.id.substr(1), k,
                                             Type::arrow(random_base_type(rng, keys, 1),
                                                         random_base_type(rng, keys, 1))});
            }
        }
        m.refs.push_back(std::move(ref));
    }
    const std::size_t ndefs = rng() % 4;
    for (std::size_t i = 0; i < ndefs; ++i) {
        ElementKey k = keys.fresh();
        if (rng() % 2 == 0) {
            m.defs.emplace_back(TypeDef{k, "D" + k.id.substr(1), random_base_type(rng, keys, 2), {}});
        } else {
            Type param = random_base_type(rng, keys, 1);
            Expr body = ex::lambda("x", param, random_expr(rng, keys, 3, {"x"}));
            m.defs.emplace_back(ValueDef{k, "h" + k.id.substr(1),
                                         Type::arrow(param, random_base_type(rng, keys, 1)), body, {}});
        }
    }
    return m;
}

inline bool refs_equal(const RefItem& a, const RefItem& b) {
    if (a.index() != b.index()) {
        return false;
    }
    return name_of(a) == name_of(b) && key_of(a) == key_of(b) && type_of(a) == type_of(b)
           && render_type(type_of(a)) == render_type(type_of(b));
}

/// Structural equality of modules, field order included.
inline bool modules_equal(const Module& a, const Module& b) {
    if (a.name != b.name || a.refs.size() != b.refs.size() || a.defs.size() != b.defs.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.refs.size(); ++i) {
        if (a.refs[i].producer != b.refs[i].producer || a.refs[i].items.size() != b.refs[i].items.size()) {
            return false;
        }
        for (std::size_t j = 0; j < a.refs[i].items.size(); ++j) {
            if (!refs_equal(a.refs[i].items[j], b.refs[i].items[j])) {
                return false;
            }
        }
    }
    for (std::size_t i = 0; i < a.defs.size(); ++i) {
        if (a.defs[i].index() != b.defs[i].index()) {
            return false;
        }
        if (const auto* t = std::get_if<TypeDef>(&a.defs[i])) {
            const auto& u = std::get<TypeDef>(b.defs[i]);
            if (t->key != u.key || t->name != u.name || render_type(t->body) != render_type(u.body)) {
                return false;
            }
        } else {
            const auto& v = std::get<ValueDef>(a.defs[i]);
            const auto& w = std::get<ValueDef>(b.defs[i]);
            if (v.key != w.key || v.name != w.name || render_type(v.type) != render_type(w.type)
                || !expr_equal(v.body, w.body)) {
                return false;
            }
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Well-typed expressions for subject reduction. The module below provides
// three local functions; the generator only builds terms whose type it
// knows by construction.

inline const char* kLocalModule = R"(
module Local {
  defs {
    type Item@k1 = {Count@k2 : int, Tag@k3 : string};
    fun Inc@k4 : int -> int = \x : int . x + 1;
    fun Label@k5 : string -> string = \s : string . s + "!";
    fun Make@k6 : int -> Item@k1 = \n : int . {Count@k2 = n, Tag@k3 = "t"};
  }
}
)";

enum class Ty { Int, Str, Item };

inline Type item_type() {
    return Type::record({Field{"Count", key("k2"), Type::integer()}, Field{"Tag", key("k3"), Type::string()}});
}

inline Type to_type(Ty t) {
    switch (t) {
    case Ty::Int:
        return Type::integer();
    case Ty::Str:
        return Type::string();
    case Ty::Item:
        return item_type();
    }
    return Type::integer();
}

struct TypedGen {
    Rng& rng;
    int fresh = 0;

    Expr gen(Ty t, int depth, std::vector<std::pair<std::string, Ty>> scope) {
        std::vector<std::string> vars;
        for (const auto& [n, ty] : scope) {
            if (ty == t) {
                vars.push_back(n);
            }
        }
        const int options = depth > 0 ? 6 : 2;
        const int pick = static_cast<int>(rng() % options);
        if (pick == 1 && !vars.empty()) {
            return ex::var(vars[rng() % vars.size()]);
        }
        if (pick <= 1) {
            return leaf(t);
        }
        if (pick == 2) {
            // immediately applied lambda
            const Ty pt = static_cast<Ty>(rng() % 3);
            const std::string x = "x" + std::to_string(fresh++);
            auto inner = scope;
            inner.emplace_back(x, pt);
            return ex::apply(ex::lambda(x, to_type(pt), gen(t, depth - 1, inner)), gen(pt, depth - 1, scope));
        }
        if (pick == 3) {
            // select from a record
            if (t != Ty::Item) {
                return ex::select(gen(Ty::Item, depth - 1, scope), t == Ty::Int ? "Count" : "Tag");
            }
            return ex::update(gen(Ty::Item, depth - 1, scope),
                              {FieldInit{"Count", key("k2"), gen(Ty::Int, depth - 1, scope)}});
        }
        if (pick == 4) {
            switch (t) {
            case Ty::Int:
                return ex::apply(ex::fun("Inc"), gen(Ty::Int, depth - 1, scope));
            case Ty::Str:
                return ex::apply(ex::fun("Label"), gen(Ty::Str, depth - 1, scope));
            case Ty::Item:
                return ex::apply(ex::fun("Make"), gen(Ty::Int, depth - 1, scope));
            }
        }
        switch (t) {
        case Ty::Int:
        case Ty::Str:
            return ex::add(gen(t, depth - 1, scope), gen(t, depth - 1, scope));
        case Ty::Item:
            return ex::record({FieldInit{"Count", key("k2"), gen(Ty::Int, depth - 1, scope)},
                               FieldInit{"Tag", key("k3"), gen(Ty::Str, depth - 1, scope)}});
        }
        return leaf(t);
    }

    Expr leaf(Ty t) {
        switch (t) {
        case Ty::Int:
            return ex::num(static_cast<std::int64_t>(rng() % 50));
        case Ty::Str:
            return ex::str(random_string(rng));
        case Ty::Item:
            return ex::record({FieldInit{"Count", key("k2"), ex::num(1)}, FieldInit{"Tag", key("k3"), ex::str("a")}});
        }
        return ex::num(0);
    }
};

} // namespace cem::testing
