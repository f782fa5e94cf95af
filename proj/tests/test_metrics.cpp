/*
 * Copyright 2026 the dismec-tools authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "dismec/metrics.hpp"
#include "doctest.h"

using namespace dismec;

namespace {

// Straight-from-definition re-implementations used as the oracle: hits over
// the top-k prefix for precision, log2 discounts against the ideal prefix
// for nDCG.
double oracle_p_at_k(const std::set<index_t>& gold, const std::vector<index_t>& ranked,
                     std::size_t k) {
    double hits = 0;
    for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i)
        if (gold.count(ranked[i])) hits += 1;
    return hits / static_cast<double>(k);
}

double oracle_ndcg_at_k(const std::set<index_t>& gold, const std::vector<index_t>& ranked,
                        std::size_t k) {
    double dcg = 0;
    for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i)
        if (gold.count(ranked[i])) dcg += 1.0 / std::log2(2.0 + i);
    double ideal = 0;
    for (std::size_t i = 0; i < std::min(k, gold.size()); ++i) ideal += 1.0 / std::log2(2.0 + i);
    return dcg / ideal;
}

}  // namespace

TEST_CASE("precision_at_k") {
    std::vector<index_t> gold{2, 5};
    std::vector<index_t> ranked{5, 1, 2};
    CHECK(precision_at_k(gold, ranked, 3) == doctest::Approx(2.0 / 3.0));

    SUBCASE("perfect prefix") {
        std::vector<index_t> g{1, 5, 9};
        std::vector<index_t> r{5, 9, 1};
        CHECK(precision_at_k(g, r, 3) == 1.0);
    }
    SUBCASE("no hits") {
        std::vector<index_t> g{7};
        std::vector<index_t> r{1, 2, 3};
        CHECK(precision_at_k(g, r, 3) == 0.0);
    }
    SUBCASE("rankings shorter than k count the missing slots as misses") {
        std::vector<index_t> g{1};
        std::vector<index_t> r{1};
        CHECK(precision_at_k(g, r, 5) == doctest::Approx(0.2));
    }
    SUBCASE("invariant to permutations within the top-k set") {
        std::vector<index_t> g{0, 2, 4};
        std::vector<index_t> r1{0, 1, 2};
        std::vector<index_t> r2{2, 0, 1};
        CHECK(precision_at_k(g, r1, 3) == precision_at_k(g, r2, 3));
    }
}

TEST_CASE("ndcg_at_k worked values") {
    SUBCASE("two gold labels, one hit at rank 1 of two") {
        std::vector<index_t> gold{3, 8};
        std::vector<index_t> ranked{3, 99};
        auto v = ndcg_at_k(gold, ranked, 2);
        REQUIRE(v.has_value());
        // DCG = 1/log2(2) = 1; normalizer = 1 + 1/log2(3)
        CHECK(std::fabs(*v - 0.61315) < 5e-6);
    }
    SUBCASE("single gold label at rank 1") {
        std::vector<index_t> gold{4};
        std::vector<index_t> ranked{4, 1, 2, 3, 5};
        CHECK(*ndcg_at_k(gold, ranked, 5) == doctest::Approx(1.0));
    }
    SUBCASE("single gold label at rank 5 gets the lowest nonzero score") {
        std::vector<index_t> gold{4};
        std::vector<index_t> ranked{1, 2, 3, 5, 4};
        auto v = ndcg_at_k(gold, ranked, 5);
        CHECK(std::fabs(*v - 0.38685) < 5e-6);
        // and it is indeed the lowest achievable nonzero value at k=5
        for (std::size_t pos = 0; pos < 4; ++pos) {
            std::vector<index_t> r{1, 2, 3, 5};
            r.insert(r.begin() + pos, 4);
            r.resize(5);
            CHECK(*ndcg_at_k(gold, r, 5) > *v);
        }
    }
    SUBCASE("empty gold has no defined normalizer") {
        std::vector<index_t> ranked{1};
        CHECK(!ndcg_at_k({}, ranked, 3).has_value());
    }
    SUBCASE("moving a hit from rank 1 to rank k strictly decreases nDCG") {
        std::vector<index_t> gold{0};
        std::vector<index_t> first{0, 1, 2};
        std::vector<index_t> last{1, 2, 0};
        CHECK(*ndcg_at_k(gold, first, 3) > *ndcg_at_k(gold, last, 3));
    }
    SUBCASE("nDCG is 1 exactly when the top min(k,|gold|) slots are all gold") {
        std::vector<index_t> gold{1, 2, 3};
        std::vector<index_t> anyorder{3, 1, 2, 9};
        CHECK(*ndcg_at_k(gold, anyorder, 3) == doctest::Approx(1.0));
        CHECK(*ndcg_at_k(gold, anyorder, 4) == doctest::Approx(1.0));  // slots beyond |gold| free
        std::vector<index_t> offender{3, 9, 2, 1};
        CHECK(*ndcg_at_k(gold, offender, 3) < 1.0);
    }
}

TEST_CASE("P@1 equals nDCG@1 on every instance") {
    std::mt19937_64 rng(61);
    for (int rep = 0; rep < 200; ++rep) {
        std::set<index_t> gold_set;
        std::vector<index_t> ranked;
        for (index_t l = 0; l < 12; ++l) {
            if (rng() % 3 == 0) gold_set.insert(l);
            ranked.push_back(l);
        }
        if (gold_set.empty()) gold_set.insert(0);
        std::shuffle(ranked.begin(), ranked.end(), rng);
        std::vector<index_t> gold(gold_set.begin(), gold_set.end());
        CHECK(precision_at_k(gold, ranked, 1) == *ndcg_at_k(gold, ranked, 1));
    }
}

TEST_CASE("metrics match the from-definition oracle on random instances") {
    std::mt19937_64 rng(67);
    for (int rep = 0; rep < 1000; ++rep) {
        std::set<index_t> gold_set;
        std::vector<index_t> pool;
        for (index_t l = 0; l < 30; ++l) pool.push_back(l);
        std::shuffle(pool.begin(), pool.end(), rng);
        std::size_t ranked_len = rng() % 10;
        std::vector<index_t> ranked(pool.begin(), pool.begin() + ranked_len);
        for (index_t l = 0; l < 30; ++l)
            if (rng() % 4 == 0) gold_set.insert(l);
        if (gold_set.empty()) gold_set.insert(static_cast<index_t>(rng() % 30));
        std::vector<index_t> gold(gold_set.begin(), gold_set.end());

        for (std::size_t k : {1, 3, 5, 8}) {
            CHECK(precision_at_k(gold, ranked, k) == oracle_p_at_k(gold_set, ranked, k));
            CHECK(*ndcg_at_k(gold, ranked, k) == oracle_ndcg_at_k(gold_set, ranked, k));
        }
    }
}

TEST_CASE("evaluate aggregates and skips empty gold sets") {
    std::vector<std::vector<index_t>> gold{{0, 1}, {}, {2}};
    std::vector<std::vector<index_t>> ranked{{0, 1}, {5}, {3, 2}};
    std::vector<std::size_t> ks{1, 2};
    auto report = evaluate(gold, ranked, ks);
    CHECK(report.evaluated == 2);
    CHECK(report.skipped == 1);
    REQUIRE(report.rows.size() == 2);
    // P@1: rows 1 and 3 -> (1 + 0)/2
    CHECK(report.rows[0].p_at_k == doctest::Approx(0.5));
    // P@2: (2/2 + 1/2)/2
    CHECK(report.rows[1].p_at_k == doctest::Approx(0.75));

    SUBCASE("predictions identical to gold rankings give P@1 = 1") {
        std::vector<std::vector<index_t>> same_gold{{3}, {1, 2}};
        std::vector<std::vector<index_t>> same_ranked{{3}, {1, 2}};
        std::vector<std::size_t> one{1};
        CHECK(evaluate(same_gold, same_ranked, one).rows[0].p_at_k == 1.0);
    }

    SUBCASE("row-count mismatch throws") {
        std::vector<std::vector<index_t>> short_ranked{{0}};
        CHECK_THROWS_AS(evaluate(gold, short_ranked, ks), std::invalid_argument);
    }
}
