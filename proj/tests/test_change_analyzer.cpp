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

#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>

namespace cem {
namespace {

using testing::Rng;

ErrorCode log_error(std::string_view text) {
    try {
        parse_log(text);
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Io;
}

TEST(Diff, CatalogV1ToV2) {
    const auto before = module_schemas(testing::sample_module("catalog_v1.cem"));
    const auto after = module_schemas(testing::sample_module("catalog_v2.cem"), {key("k10")});
    const auto changes = diff_signatures(before, after);
    const std::vector<Change> want{{ChangeKind::RenameField, key("k4")}, {ChangeKind::NewOptionalField, key("k10")}};
    EXPECT_EQ(changes, want);
    EXPECT_TRUE(classify_deployment(changes).safe);
}

TEST(Diff, CatalogV2ToV3) {
    const auto changes = diff_signatures(module_schemas(testing::sample_module("catalog_v2.cem")),
                                         module_schemas(testing::sample_module("catalog_v3.cem")));
    const std::vector<Change> want{{ChangeKind::RemoveField, key("k5")}};
    EXPECT_EQ(changes, want);
    // Marketing v2 uses k5, Marketing v3 does not
    EXPECT_FALSE(classify_deployment(changes, used_keys(testing::sample_module("marketing_v2.cem"))).safe);
    EXPECT_TRUE(classify_deployment(changes, used_keys(testing::sample_module("marketing_v3.cem"))).safe);
    EXPECT_FALSE(classify_deployment(changes).safe);
}

TEST(Diff, EveryKind) {
    const Type before = parse_type("{A@k1 : int, B@k2 : int, C@k3 : string, D@k4 : int, E@k5 : int}");
    const Type after = parse_type("{B@k2 : string, A@k1 : int, Cee@k3 : string, D@k4 : int, E@k5 : int, F@k6 : int, G@k7 : int}");
    const auto changes = diff_records(record_schema("T", key("k0"), before, {key("k4")}),
                                      record_schema("T", key("k0"), after, {key("k5"), key("k6")}));
    std::multiset<ChangeKind> kinds;
    for (const auto& c : changes) {
        kinds.insert(c.kind);
    }
    const std::multiset<ChangeKind> want{ChangeKind::ChangeFieldType, ChangeKind::RenameField,
                                         ChangeKind::ChangeToMandatory, ChangeKind::ChangeToOptional,
                                         ChangeKind::NewOptionalField, ChangeKind::NewMandatoryField,
                                         ChangeKind::ReorderFields};
    EXPECT_EQ(kinds, want);
    const auto removed = diff_records(record_schema("T", key("k0"), before), record_schema("T", key("k0"), parse_type("{A@k1 : int}")));
    EXPECT_EQ(removed.size(), 4u);
}

TEST(Diff, DuplicateKeysInSchema) {
    RecordSchema bad{"T", key("k0"), {{"A", key("k1"), Type::integer(), false, 0}, {"B", key("k1"), Type::integer(), false, 1}}};
    try {
        diff_records(bad, bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DuplicateKeyInSchema);
    }
}

// Edits the analyzer and the compatibility relation judge the same way:
// renames, reorders, optional additions, removals, and type changes on
// used keys. On these the two verdicts must agree.
TEST(Classify, AgreesWithCompatibility) {
    Rng rng(8);
    int unsafe = 0;
    for (int i = 0; i < 2000; ++i) {
        std::vector<Field> fields;
        const std::size_t n = 1 + rng() % 5;
        for (std::size_t j = 0; j < n; ++j) {
            fields.push_back(Field{"F" + std::to_string(j), key("k" + std::to_string(j + 1)),
                                   rng() % 2 ? Type::integer() : Type::string()});
        }
        KeySet mu;
        for (const auto& f : fields) {
            if (rng() % 2) {
                mu.insert(f.key);
            }
        }
        std::vector<Field> next;
        KeySet added;
        for (const auto& f : fields) {
            switch (rng() % 5) {
            case 0:
                continue;
            case 1:
                next.push_back(Field{"R" + f.key.id, f.key, f.type});
                break;
            case 2:
                if (mu.contains(f.key)) {
                    next.push_back(Field{f.label, f.key, f.type.is_int() ? Type::string() : Type::integer()});
                    break;
                }
                [[fallthrough]];
            default:
                next.push_back(f);
            }
        }
        if (rng() % 2) {
            next.push_back(Field{"New", key("k99"), Type::string()});
            added.insert(key("k99"));
        }
        if (rng() % 3 == 0) {
            std::shuffle(next.begin(), next.end(), rng);
        }
        const Type before = Type::record(fields);
        const Type after = Type::record(next);
        const auto changes = diff_records(record_schema("T", key("k0"), before),
                                          record_schema("T", key("k0"), after, added));
        const bool safe = classify_deployment(changes, mu).safe;
        ASSERT_EQ(safe, type_compatible(before, after, mu)) << render_type(before) << " => " << render_type(after);
        unsafe += safe ? 0 : 1;
    }
    EXPECT_GT(unsafe, 100);
}

TEST(Percent, HalfUp) {
    EXPECT_EQ(percent(1333, 3759), "35.46");
    EXPECT_EQ(percent(3354, 4659), "71.99");
    EXPECT_EQ(percent(5053, 8889), "56.85");
    EXPECT_EQ(percent(1, 8), "12.50");
    EXPECT_EQ(percent(1, 3), "33.33");
    EXPECT_EQ(percent(2, 3), "66.67");
    EXPECT_EQ(percent(0, 0), "0.00");
    EXPECT_EQ(percent(7, 7), "100.00");
}

TEST(Aggregate, PublishedStudy) {
    const AggregateTable t = aggregate_log(parse_log(factory_study_log()));
    ASSERT_EQ(t.factories.size(), 3u);
    const auto& f1 = t.factories[0];
    EXPECT_EQ(f1.changes, 14507);
    EXPECT_EQ(f1.broken, 2426);
    EXPECT_EQ(f1.safe(), 1333);
    EXPECT_EQ(f1.safe_percent(), "35.46");
    EXPECT_FALSE(f1.discrepant());
    const auto& f2 = t.factories[1];
    EXPECT_EQ(f2.broken, 1305);
    EXPECT_EQ(f2.safe(), 3354);
    EXPECT_EQ(f2.safe_percent(), "71.99");
    const auto& f3 = t.factories[2];
    EXPECT_EQ(f3.broken, 127);
    EXPECT_EQ(f3.published_broken, 105);
    EXPECT_TRUE(f3.discrepant());
    EXPECT_EQ(t.deployments, 8889);
    EXPECT_EQ(t.reported_broken, 3836);
    EXPECT_EQ(t.reported_safe(), 5053);
    EXPECT_EQ(percent(t.reported_safe(), t.deployments), "56.85");
    EXPECT_EQ(t.safe(), 5031);
    const std::string table = render_table(t);
    EXPECT_NE(table.find("Factory3 published broken 105"), std::string::npos);
    EXPECT_NE(table.find("total (computed)"), std::string::npos);
}

TEST(Aggregate, SampleFileMatchesEmbeddedFixture) {
    const std::string file = testing::sample_text("study_tables.log");
    EXPECT_EQ(render_table(aggregate_log(parse_log(file))), render_table(aggregate_log(parse_log(factory_study_log()))));
}

TEST(Aggregate, ListedDeployments) {
    const AggregateTable t = aggregate_log(parse_log(testing::sample_text("deployments.log")));
    ASSERT_EQ(t.factories.size(), 2u);
    EXPECT_EQ(t.factories[0].factory, "Alpha");
    EXPECT_EQ(t.factories[0].deployments, 3);
    EXPECT_EQ(t.factories[0].broken, 1);
    EXPECT_EQ(t.factories[1].broken, 1);
    EXPECT_EQ(t.factories[1].safe_percent(), "50.00");
    EXPECT_EQ(percent(t.safe(), t.deployments), "60.00");
    EXPECT_FALSE(t.has_discrepancy());
}

TEST(Aggregate, LineOrderDoesNotMatter) {
    Rng rng(17);
    std::vector<std::string> lines;
    for (int i = 0; i < 60; ++i) {
        std::string items;
        for (ChangeKind k : kAllChangeKinds) {
            if (rng() % 3 == 0) {
                items += (items.empty() ? "" : ";") + std::string(to_string(k)) + "="
                         + std::to_string(1 + rng() % 4);
            }
        }
        const std::string line = "deployment,d" + std::to_string(i) + ",F" + std::to_string(rng() % 3)
                                 + "," + (items.empty() ? "RenameField=1" : items);
        lines.push_back(line);
    }
    auto join = [](const std::vector<std::string>& ls) {
        std::string out;
        for (const auto& l : ls) {
            out += l + "\n";
        }
        return out;
    };
    const AggregateTable base = aggregate_log(parse_log(join(lines)));
    for (int round = 0; round < 20; ++round) {
        std::shuffle(lines.begin(), lines.end(), rng);
        const AggregateTable t = aggregate_log(parse_log(join(lines)));
        EXPECT_EQ(t.deployments, base.deployments);
        EXPECT_EQ(t.broken, base.broken);
        EXPECT_EQ(t.changes, base.changes);
        for (const auto& row : base.factories) {
            auto it = std::find_if(t.factories.begin(), t.factories.end(),
                                   [&](const FactoryRow& r) { return r.factory == row.factory; });
            ASSERT_NE(it, t.factories.end());
            EXPECT_EQ(it->broken, row.broken);
            EXPECT_EQ(it->deployments, row.deployments);
        }
    }
}

TEST(ParseLog, Errors) {
    EXPECT_EQ(log_error("deployment,d1,A,Bogus=1\n"), ErrorCode::MalformedLog);
    EXPECT_EQ(log_error("deployment,d1,A,RenameField\n"), ErrorCode::MalformedLog);
    EXPECT_EQ(log_error("deployment,d1,A,RenameField=-1\n"), ErrorCode::NegativeCount);
    EXPECT_EQ(log_error("factory,A,deployments=x\n"), ErrorCode::MalformedLog);
    EXPECT_EQ(log_error("widget,1\n"), ErrorCode::MalformedLog);
    EXPECT_EQ(log_error(testing::sample_text("malformed.log")), ErrorCode::MalformedLog);
    try {
        parse_log(testing::sample_text("malformed.log"));
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("line 17"), std::string::npos) << e.what();
    }
    EXPECT_TRUE(parse_log("# nothing\n\n").records.empty());
}

} // namespace
} // namespace cem
