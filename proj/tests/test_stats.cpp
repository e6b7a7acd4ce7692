#include <doctest.h>

#include <cmath>

#include "instrexp/error.hpp"
#include "instrexp/io.hpp"
#include "instrexp/stats.hpp"
#include "support.hpp"

using namespace instrexp;
using namespace instrexp::stats;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::InvalidArgument;
}

// textbook single-pass formula in long double
double pearson_oracle(const std::vector<double>& xs, const std::vector<double>& ys) {
    long double n = xs.size(), sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        long double x = xs[i], y = ys[i];
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    return static_cast<double>((n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy)));
}

std::vector<InstructionTemplate> of_task(const std::vector<InstructionTemplate>& ts, const std::string& task) {
    std::vector<InstructionTemplate> out;
    for (const auto& t : ts) {
        if (t.task_id == task) out.push_back(t);
    }
    return out;
}

}  // namespace

TEST_CASE("pearson known values") {
    std::vector<double> x = {1, 2, 3, 4};
    std::vector<double> up = {2, 4, 6, 8};
    std::vector<double> down = {8, 6, 4, 2};
    CHECK(pearson(x, up) == 1.0);
    CHECK(pearson(x, down) == -1.0);
    // Anscombe's first data set
    std::vector<double> ax = {10, 8, 13, 9, 11, 14, 6, 4, 12, 7, 5};
    std::vector<double> ay = {8.04, 6.95, 7.58, 8.81, 8.33, 9.96, 7.24, 4.26, 10.84, 4.82, 5.68};
    CHECK(std::abs(pearson(ax, ay) - 0.81642051634484) < 1e-13);
}

TEST_CASE("pearson agrees with an independent formula") {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n = 3 + rng.below(60);
        std::vector<double> xs(n), ys(n);
        double slope = rng.uniform01() * 4 - 2;
        for (std::size_t i = 0; i < n; ++i) {
            xs[i] = rng.uniform01() * 10;
            ys[i] = slope * xs[i] + rng.uniform01() * 5;
        }
        CHECK(std::abs(pearson(xs, ys) - pearson_oracle(xs, ys)) < 1e-10);
    }
}

TEST_CASE("pearson errors") {
    std::vector<double> a = {1, 2, 3};
    std::vector<double> b = {1, 2};
    std::vector<double> flat = {5, 5, 5};
    std::vector<double> one = {1};
    CHECK(code_of([&] { pearson(a, b); }) == ErrorCode::LengthMismatch);
    CHECK(code_of([&] { pearson(one, one); }) == ErrorCode::LengthMismatch);
    CHECK(code_of([&] { pearson(a, flat); }) == ErrorCode::ZeroVariance);
}

TEST_CASE("corpus stats on the twenty-template fixture") {
    auto ts = io::read_templates(testing::data_dir() / "stats_20.jsonl");
    auto s = corpus_stats(ts);
    CHECK(s.n_instructions == 20);
    CHECK_FALSE(s.empty);
    CHECK(s.avg_word_length == 4.25);
    CHECK(s.length_histogram ==
          std::map<std::size_t, std::size_t>{{1, 2}, {3, 5}, {4, 6}, {5, 2}, {6, 1}, {7, 4}});
    CHECK(s.prefix2_distribution.size() == 18);
    using Key = std::pair<std::string, std::string>;
    CHECK(s.prefix2_distribution.at(Key{"Describe", "the"}) == 2);
    CHECK(s.prefix2_distribution.at(Key{"What", "is"}) == 2);
    CHECK(s.prefix2_distribution.at(Key{"Describe", "{regions}"}) == 1);
    CHECK(s.prefix2_distribution.at(Key{"Caption", ""}) == 1);
    CHECK(s.prefix2_distribution.at(Key{"Look", ""}) == 1);
}

TEST_CASE("empty corpus") {
    auto s = corpus_stats({});
    CHECK(s.empty);
    CHECK(s.n_instructions == 0);
    CHECK(s.avg_word_length == 0.0);
}

TEST_CASE("task attributes from the heuristic and from annotations") {
    auto ts = io::read_templates(testing::data_dir() / "stats_20.jsonl");
    auto qa = task_attributes("qa", of_task(ts, "qa"));
    CHECK(qa.direct_question);
    CHECK_FALSE(qa.option_inclusive);
    CHECK(qa.heuristic);
    auto orm = task_attributes("orm", of_task(ts, "orm"));
    CHECK_FALSE(orm.direct_question);
    CHECK(orm.option_inclusive);
    auto va = task_attributes("va", of_task(ts, "va"));
    CHECK_FALSE(va.option_inclusive);

    auto annotated = of_task(ts, "va");
    annotated[0].annotation = TaskAnnotation{true, true};
    auto a = task_attributes("va", annotated);
    CHECK(a.direct_question);
    CHECK(a.option_inclusive);
    CHECK_FALSE(a.heuristic);
}

TEST_CASE("template text proportion") {
    std::vector<InstructionTemplate> ts = {parse_template("Describe {x}.", "a", "t")};
    std::vector<InstanceRecord> xs = {{"1", "t", {{"x", std::string("cat")}}, "y", std::nullopt},
                                      {"2", "t", {{"x", std::string("elephant")}}, "y", std::nullopt},
                                      {"3", "t", {}, "y", std::nullopt}};
    Rng rng(1);
    auto r = template_text_proportion(ts, xs, 1000, rng);
    CHECK(r.pairs == 2);
    CHECK(r.skipped == 1);
    CHECK(r.mean == doctest::Approx((10.0 / 13.0 + 10.0 / 18.0) / 2).epsilon(1e-12));

    std::vector<InstructionTemplate> bare = {parse_template("{x}", "b", "t")};
    std::vector<InstanceRecord> blank = {{"1", "t", {{"x", std::string("")}}, "y", std::nullopt}};
    auto e = template_text_proportion(bare, blank, 10, rng);
    CHECK(e.pairs == 0);
    CHECK(e.skipped == 1);
    CHECK(e.mean == 0.0);

    std::vector<InstanceRecord> lots;
    for (int i = 0; i < 50; ++i) lots.push_back({std::to_string(i), "t", {{"x", std::string("v")}}, "y", std::nullopt});
    auto capped = template_text_proportion(ts, lots, 20, rng);
    CHECK(capped.pairs == 20);
    CHECK(capped.mean == doctest::Approx(10.0 / 11.0));
}
