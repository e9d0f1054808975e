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

// Signature change analysis: a key-based diff of record schemas into a
// fixed change taxonomy, safe/breaking classification of a deployment, and
// worst-case aggregation of change logs.
//
// Optional fields exist only at this layer. The calculus itself fills any
// added field with a default, so a new mandatory field is compatible there
// but counts as breaking here.

#pragma once

#include "cem/ast.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace cem {

enum class ChangeKind : std::uint8_t {
    NewOptionalField,
    ChangeFieldType,
    RemoveField,
    NewMandatoryField,
    RenameField,
    ReorderFields,
    ChangeToOptional,
    ChangeToMandatory,
};

inline constexpr std::array<ChangeKind, 8> kAllChangeKinds = {
  ChangeKind::NewOptionalField,  ChangeKind::ChangeFieldType, ChangeKind::RemoveField,
  ChangeKind::NewMandatoryField, ChangeKind::RenameField,     ChangeKind::ReorderFields,
  ChangeKind::ChangeToOptional,  ChangeKind::ChangeToMandatory,
};

inline std::string_view to_string(ChangeKind k) {
    switch (k) {
    case ChangeKind::NewOptionalField: return "NewOptionalField";
    case ChangeKind::ChangeFieldType: return "ChangeFieldType";
    case ChangeKind::RemoveField: return "RemoveField";
    case ChangeKind::NewMandatoryField: return "NewMandatoryField";
    case ChangeKind::RenameField: return "RenameField";
    case ChangeKind::ReorderFields: return "ReorderFields";
    case ChangeKind::ChangeToOptional: return "ChangeToOptional";
    case ChangeKind::ChangeToMandatory: return "ChangeToMandatory";
    }
    return "?";
}

inline std::optional<ChangeKind> parse_change_kind(std::string_view s) {
    for (ChangeKind k : kAllChangeKinds) {
        if (to_string(k) == s) {
            return k;
        }
    }
    return std::nullopt;
}

/// Kinds that never break a consumer. RemoveField is decided per key.
inline bool always_compatible(ChangeKind k) {
    return k == ChangeKind::NewOptionalField || k == ChangeKind::RenameField
           || k == ChangeKind::ReorderFields || k == ChangeKind::ChangeToOptional;
}

struct FieldSchema {
    std::string label;
    ElementKey key;
    Type type;
    bool optional = false;
    std::size_t position = 0;
};

struct RecordSchema {
    std::string name;
    ElementKey key;
    std::vector<FieldSchema> fields;
};

/// Schema of a record type. Fields whose key is in `optional` are flagged.
inline RecordSchema record_schema(std::string name, ElementKey key, const Type& record,
                                  const KeySet& optional = {}) {
    RecordSchema out{std::move(name), std::move(key), {}};
    for (std::size_t i = 0; i < record.fields.size(); ++i) {
        const Field& f = record.fields[i];
        out.fields.push_back(FieldSchema{f.label, f.key, f.type, optional.contains(f.key), i});
    }
    return out;
}

/// Record schemas of every record type a module defines, fully expanded.
inline std::vector<RecordSchema> module_schemas(const Module& m, const KeySet& optional = {}) {
    std::vector<RecordSchema> out;
    const TypeScope scope = module_type_scope(m);
    for (const auto& d : m.defs) {
        if (const auto* t = std::get_if<TypeDef>(&d)) {
            Type body = expand_type(t->body, scope);
            if (body.is_record()) {
                out.push_back(record_schema(t->name, t->key, body, optional));
            }
        }
    }
    return out;
}

struct Change {
    ChangeKind kind;
    ElementKey key;

    friend bool operator==(const Change&, const Change&) = default;
};

namespace detail {

inline void check_schema(const RecordSchema& r) {
    std::set<ElementKey> seen;
    for (const auto& f : r.fields) {
        if (!seen.insert(f.key).second) {
            fail(ErrorCode::DuplicateKeyInSchema,
                 "key " + f.key.id + " appears twice in " + (r.name.empty() ? "a record" : r.name));
        }
    }
}

inline std::vector<ElementKey> relative_order(const RecordSchema& r, const RecordSchema& other) {
    std::vector<const FieldSchema*> common;
    for (const auto& f : r.fields) {
        for (const auto& g : other.fields) {
            if (g.key == f.key) {
                common.push_back(&f);
            }
        }
    }
    std::stable_sort(common.begin(), common.end(),
                     [](const FieldSchema* a, const FieldSchema* b) { return a->position < b->position; });
    std::vector<ElementKey> out;
    for (const auto* f : common) {
        out.push_back(f->key);
    }
    return out;
}

} // namespace detail

/// Changes from `before` to `after` for one record, matched by key.
inline std::vector<Change> diff_records(const RecordSchema& before, const RecordSchema& after) {
    detail::check_schema(before);
    detail::check_schema(after);
    std::vector<Change> out;
    for (const auto& f : before.fields) {
        const FieldSchema* g = nullptr;
        for (const auto& x : after.fields) {
            if (x.key == f.key) {
                g = &x;
            }
        }
        if (g == nullptr) {
            out.push_back({ChangeKind::RemoveField, f.key});
            continue;
        }
        if (g->label != f.label) {
            out.push_back({ChangeKind::RenameField, f.key});
        }
        if (!same_shape(g->type, f.type)) {
            out.push_back({ChangeKind::ChangeFieldType, f.key});
        }
        if (f.optional && !g->optional) {
            out.push_back({ChangeKind::ChangeToMandatory, f.key});
        } else if (!f.optional && g->optional) {
            out.push_back({ChangeKind::ChangeToOptional, f.key});
        }
    }
    for (const auto& g : after.fields) {
        bool existed = false;
        for (const auto& f : before.fields) {
            existed = existed || f.key == g.key;
        }
        if (!existed) {
            out.push_back({g.optional ? ChangeKind::NewOptionalField : ChangeKind::NewMandatoryField, g.key});
        }
    }
    if (detail::relative_order(before, after) != detail::relative_order(after, before)) {
        out.push_back({ChangeKind::ReorderFields, before.key});
    }
    return out;
}

/// Field-level changes between two signatures. Records are matched by key;
/// a record present on one side only is not a field change and is skipped.
inline std::vector<Change> diff_signatures(const std::vector<RecordSchema>& before,
                                           const std::vector<RecordSchema>& after) {
    std::vector<Change> out;
    for (const auto& r : before) {
        detail::check_schema(r);
    }
    for (const auto& r : after) {
        detail::check_schema(r);
    }
    for (const auto& r : before) {
        for (const auto& s : after) {
            if (s.key == r.key) {
                auto changes = diff_records(r, s);
                out.insert(out.end(), changes.begin(), changes.end());
            }
        }
    }
    return out;
}

struct Classification {
    bool safe = true;
    std::vector<std::string> reasons;
};

/// A deployment is breaking if any change is outside the compatible set.
/// Removals are safe only when `used` is known and does not hold the key.
inline Classification classify_deployment(const std::vector<Change>& changes,
                                          const std::optional<KeySet>& used = std::nullopt) {
    Classification out;
    for (const auto& c : changes) {
        if (always_compatible(c.kind)) {
            continue;
        }
        if (c.kind == ChangeKind::RemoveField) {
            if (used && !used->contains(c.key)) {
                continue;
            }
            out.reasons.push_back("RemoveField " + c.key.id
                                  + (used ? " is used by a consumer" : " with usage unknown"));
        } else {
            out.reasons.push_back(std::string(to_string(c.kind)) + " " + c.key.id);
        }
        out.safe = false;
    }
    return out;
}

// Log format, one record per line, `#` starts a comment:
//
//   deployment,<id>,<factory>,<Kind>=<n>;<Kind>=<n>...
//   factory,<factory>,deployments=<n>[,published-broken=<n>]
//   kind,<factory>,<Kind>,changes=<n>,deployments=<n>
//
// `deployment` lines describe single deployments. `factory` and `kind`
// lines carry already aggregated counts for data that only exists in
// that form. A factory's total is its `factory` line if present, otherwise
// the number of its `deployment` lines.

struct DeploymentRecord {
    std::string id;
    std::string factory;
    std::map<ChangeKind, std::int64_t> counts;
};

struct FactoryDeclaration {
    std::int64_t deployments = 0;
    std::optional<std::int64_t> published_broken;
};

struct KindCounts {
    std::int64_t changes = 0;
    std::int64_t deployments = 0;
};

struct ChangeLog {
    std::vector<DeploymentRecord> records;
    std::map<std::string, FactoryDeclaration> factories;
    std::map<std::string, std::map<ChangeKind, KindCounts>> kinds;
    // factories in order of first mention
    std::vector<std::string> order;

    void mention(const std::string& factory) {
        if (std::find(order.begin(), order.end(), factory) == order.end()) {
            order.push_back(factory);
        }
    }
};

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
        out.push_back(cur);
    }
    if (!s.empty() && s.back() == sep) {
        out.emplace_back();
    }
    return out;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

[[noreturn]] inline void malformed(int line, const std::string& what) {
    fail(ErrorCode::MalformedLog, "line " + std::to_string(line) + ": " + what);
}

inline std::int64_t parse_count(const std::string& text, int line) {
    const std::string t = trim(text);
    std::size_t used = 0;
    std::int64_t n = 0;
    try {
        n = std::stoll(t, &used);
    } catch (const std::exception&) {
        malformed(line, "expected a count, found '" + t + "'");
    }
    if (used != t.size()) {
        malformed(line, "expected a count, found '" + t + "'");
    }
    if (n < 0) {
        fail(ErrorCode::NegativeCount, "line " + std::to_string(line) + ": negative count " + t);
    }
    return n;
}

inline std::pair<std::string, std::string> split_pair(const std::string& item, int line) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
        malformed(line, "expected name=count, found '" + item + "'");
    }
    return {trim(item.substr(0, eq)), item.substr(eq + 1)};
}

inline ChangeKind kind_named(const std::string& name, int line) {
    auto k = parse_change_kind(name);
    if (!k) {
        malformed(line, "unknown change kind '" + name + "'");
    }
    return *k;
}

inline std::int64_t named_count(const std::string& item, const std::string& name, int line) {
    auto [n, v] = split_pair(item, line);
    if (n != name) {
        malformed(line, "expected " + name + "=, found '" + item + "'");
    }
    return parse_count(v, line);
}

} // namespace detail

inline ChangeLog parse_log(std::string_view text) {
    ChangeLog log;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string s = detail::trim(raw.substr(0, raw.find('#')));
        if (s.empty()) {
            continue;
        }
        auto cols = detail::split(s, ',');
        for (auto& c : cols) {
            c = detail::trim(c);
        }
        const std::string& tag = cols[0];
        if (tag == "deployment") {
            if (cols.size() != 4 || cols[1].empty() || cols[2].empty()) {
                detail::malformed(line, "expected deployment,<id>,<factory>,<counts>");
            }
            DeploymentRecord r{cols[1], cols[2], {}};
            if (!cols[3].empty()) {
                for (const auto& item : detail::split(cols[3], ';')) {
                    auto [name, value] = detail::split_pair(item, line);
                    r.counts[detail::kind_named(name, line)] += detail::parse_count(value, line);
                }
            }
            log.mention(r.factory);
            log.records.push_back(std::move(r));
        } else if (tag == "factory") {
            if (cols.size() < 3 || cols.size() > 4 || cols[1].empty()) {
                detail::malformed(line, "expected factory,<factory>,deployments=<n>[,published-broken=<n>]");
            }
            if (log.factories.contains(cols[1])) {
                detail::malformed(line, "factory " + cols[1] + " declared twice");
            }
            FactoryDeclaration d;
            d.deployments = detail::named_count(cols[2], "deployments", line);
            if (cols.size() == 4) {
                d.published_broken = detail::named_count(cols[3], "published-broken", line);
            }
            log.mention(cols[1]);
            log.factories[cols[1]] = d;
        } else if (tag == "kind") {
            if (cols.size() != 5 || cols[1].empty()) {
                detail::malformed(line, "expected kind,<factory>,<Kind>,changes=<n>,deployments=<n>");
            }
            KindCounts& k = log.kinds[cols[1]][detail::kind_named(cols[2], line)];
            k.changes += detail::named_count(cols[3], "changes", line);
            k.deployments += detail::named_count(cols[4], "deployments", line);
            log.mention(cols[1]);
        } else {
            detail::malformed(line, "unknown record type '" + tag + "'");
        }
    }
    return log;
}

/// Percentage with two decimals, rounded half up. `0/0` is 0.00.
inline std::string percent(std::int64_t part, std::int64_t whole) {
    if (whole <= 0) {
        return "0.00";
    }
    const std::int64_t hundredths = (part * 20000 + whole) / (2 * whole);
    const std::int64_t frac = hundredths % 100;
    return std::to_string(hundredths / 100) + "." + (frac < 10 ? "0" : "") + std::to_string(frac);
}

struct FactoryRow {
    std::string factory;
    std::int64_t changes = 0;
    std::int64_t deployments = 0;
    std::int64_t broken = 0;
    std::map<ChangeKind, KindCounts> kinds;
    std::optional<std::int64_t> published_broken;

    std::int64_t safe() const { return deployments - broken; }
    std::string safe_percent() const { return percent(safe(), deployments); }
    bool discrepant() const { return published_broken && *published_broken != broken; }
};

struct AggregateTable {
    std::vector<FactoryRow> factories;
    std::int64_t changes = 0;
    std::int64_t deployments = 0;
    // worst case computed from the log
    std::int64_t broken = 0;
    // published figures where the log carries them, computed elsewhere
    std::int64_t reported_broken = 0;

    std::int64_t safe() const { return deployments - broken; }
    std::int64_t reported_safe() const { return deployments - reported_broken; }
    bool has_discrepancy() const {
        return std::any_of(factories.begin(), factories.end(),
                           [](const FactoryRow& f) { return f.discrepant(); });
    }
};

/// A listed deployment is broken when it holds any incompatible change.
/// Aggregated `kind` rows only allow the worst case: every incompatible
/// change sits in its own deployment, so they add their deployment counts,
/// capped at the factory total. RemoveField is always counted as
/// incompatible since logs carry no usage information.
inline AggregateTable aggregate_log(const ChangeLog& log) {
    AggregateTable out;
    for (const auto& name : log.order) {
        FactoryRow row;
        row.factory = name;
        std::int64_t record_count = 0;
        for (const auto& r : log.records) {
            if (r.factory != name) {
                continue;
            }
            ++record_count;
            bool breaks = false;
            for (const auto& [k, n] : r.counts) {
                row.kinds[k].changes += n;
                row.kinds[k].deployments += n > 0 ? 1 : 0;
                breaks = breaks || (n > 0 && !always_compatible(k));
            }
            row.broken += breaks ? 1 : 0;
        }
        if (auto it = log.kinds.find(name); it != log.kinds.end()) {
            for (const auto& [k, c] : it->second) {
                row.kinds[k].changes += c.changes;
                row.kinds[k].deployments += c.deployments;
                if (!always_compatible(k)) {
                    row.broken += c.deployments;
                }
            }
        }
        row.deployments = record_count;
        if (auto it = log.factories.find(name); it != log.factories.end()) {
            row.deployments = it->second.deployments;
            row.published_broken = it->second.published_broken;
        }
        for (const auto& [k, c] : row.kinds) {
            row.changes += c.changes;
        }
        row.broken = std::min(row.broken, row.deployments);
        out.changes += row.changes;
        out.deployments += row.deployments;
        out.broken += row.broken;
        out.reported_broken += row.published_broken ? *row.published_broken : row.broken;
        out.factories.push_back(std::move(row));
    }
    return out;
}

/// The three-factory change study as aggregated counts: per-kind change and
/// deployment counts, plus each factory's deployment total and reported
/// broken count.
inline std::string_view factory_study_log() {
    return R"(# Signature-change study of three software factories.
# kind rows: changes = occurrences, deployments = deployments with that kind.
factory,Factory1,deployments=3759,published-broken=2426
factory,Factory2,deployments=4659,published-broken=1305
factory,Factory3,deployments=471,published-broken=105
kind,Factory1,NewOptionalField,changes=7345,deployments=2192
kind,Factory1,ChangeFieldType,changes=2204,deployments=723
kind,Factory1,RemoveField,changes=1625,deployments=877
kind,Factory1,NewMandatoryField,changes=1725,deployments=798
kind,Factory1,RenameField,changes=1156,deployments=546
kind,Factory1,ReorderFields,changes=320,deployments=182
kind,Factory1,ChangeToOptional,changes=99,deployments=80
kind,Factory1,ChangeToMandatory,changes=33,deployments=28
kind,Factory2,NewOptionalField,changes=2354,deployments=1132
kind,Factory2,ChangeFieldType,changes=2629,deployments=449
kind,Factory2,RemoveField,changes=2507,deployments=493
kind,Factory2,NewMandatoryField,changes=586,deployments=357
kind,Factory2,RenameField,changes=620,deployments=353
kind,Factory2,ReorderFields,changes=96,deployments=54
kind,Factory2,ChangeToOptional,changes=43,deployments=43
kind,Factory2,ChangeToMandatory,changes=11,deployments=6
kind,Factory3,NewOptionalField,changes=301,deployments=115
kind,Factory3,ChangeFieldType,changes=32,deployments=22
kind,Factory3,RemoveField,changes=70,deployments=45
kind,Factory3,NewMandatoryField,changes=108,deployments=38
kind,Factory3,RenameField,changes=45,deployments=36
kind,Factory3,ReorderFields,changes=34,deployments=16
kind,Factory3,ChangeToOptional,changes=11,deployments=4
kind,Factory3,ChangeToMandatory,changes=32,deployments=22
)";
}

namespace detail {

inline std::string pad_left(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

inline std::string pad_right(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

} // namespace detail

/// Aligned text table. Factories whose published broken count differs from
/// the computed one get a note line below the table.
inline std::string render_table(const AggregateTable& t) {
    using detail::pad_left;
    using detail::pad_right;
    std::ostringstream out;
    auto row = [&](const std::string& name, std::int64_t changes, std::int64_t deployments,
                   std::int64_t broken, std::int64_t safe, const std::string& pct) {
        out << pad_right(name, 18) << pad_left(std::to_string(changes), 9)
            << pad_left(std::to_string(deployments), 13) << pad_left(std::to_string(broken), 8)
            << pad_left(std::to_string(safe), 8) << pad_left(pct + "%", 9) << "\n";
    };
    out << pad_right("factory", 18) << pad_left("changes", 9) << pad_left("deployments", 13)
        << pad_left("broken", 8) << pad_left("safe", 8) << pad_left("safe%", 9) << "\n";
    for (const auto& f : t.factories) {
        row(f.factory, f.changes, f.deployments, f.broken, f.safe(), f.safe_percent());
    }
    row("total", t.changes, t.deployments, t.reported_broken, t.reported_safe(),
        percent(t.reported_safe(), t.deployments));
    if (t.has_discrepancy()) {
        row("total (computed)", t.changes, t.deployments, t.broken, t.safe(),
            percent(t.safe(), t.deployments));
    }
    for (const auto& f : t.factories) {
        if (f.discrepant()) {
            const std::int64_t safe = f.deployments - *f.published_broken;
            out << "note: " << f.factory << " published broken " << *f.published_broken
                << " (safe " << safe << ", " << percent(safe, f.deployments)
                << "%) differs from the computed worst case " << f.broken
                << "; the total row uses the published figure\n";
        }
    }
    return out.str();
}

} // namespace cem
