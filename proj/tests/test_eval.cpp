#include <doctest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "stagefix/eval.hpp"
#include "stagefix/stats.hpp"
#include "synthetic.hpp"

using namespace stagefix;
using testing_support::typed_hunks;
using testing_support::typed_instance;
using json = nlohmann::json;

namespace {

std::vector<std::string> random_stream(std::mt19937& rng, std::size_t max_len, int vocab) {
    std::vector<std::string> out(rng() % (max_len + 1));
    for (auto& t : out) t = "t" + std::to_string(rng() % vocab);
    return out;
}

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& t : v) s += (s.empty() ? "" : " ") + t;
    return s;
}

}  // namespace

TEST_CASE("exact_match is whitespace-insensitive token equality") {
    CHECK(exact_match("return a+b;", "return a+b;"));
    CHECK(exact_match("return a + b ;", "return\ta+b;"));
    CHECK_FALSE(exact_match("return a + c;", "return a + b;"));
}

TEST_CASE("levenshtein basics") {
    CHECK(levenshtein_tokens(TokenStream({"a", "b", "c"}), TokenStream({"a", "x", "c"})) == 1);
    CHECK(levenshtein_tokens("x = 1 ;", "x = 1 ;") == 0);
    CHECK(levenshtein_tokens("", "a b c") == 3);
}

TEST_CASE("levenshtein agrees with the oracle and is a metric") {
    std::mt19937 rng(17);
    for (int i = 0; i < 300; ++i) {
        const auto a = random_stream(rng, 30, 6);
        const auto b = random_stream(rng, 30, 6);
        const auto c = random_stream(rng, 30, 6);
        const auto ab = levenshtein_tokens(TokenStream(a), TokenStream(b));
        CHECK(ab == oracle::edit_distance(a, b));
        CHECK(ab == levenshtein_tokens(TokenStream(b), TokenStream(a)));
        CHECK((ab == 0) == (a == b));
        CHECK((ab == 0) == exact_match(join(a), join(b)));
        CHECK(ab <= levenshtein_tokens(TokenStream(a), TokenStream(c)) + levenshtein_tokens(TokenStream(c), TokenStream(b)));
        // an edit script has exactly `ab` non-match operations
        const auto ops = edit_script(TokenStream(a), TokenStream(b));
        CHECK(static_cast<std::size_t>(std::count_if(ops.begin(), ops.end(), [](EditOp o) { return o != EditOp::Match; })) == ab);
    }
}

TEST_CASE("fix_at_k") {
    CHECK(fix_at_k({{"a ;"}, {"b ;"}}, {"a;", "b;"}, 1) == 1.0);
    CHECK(fix_at_k({{"x"}, {"b ;"}, {}, {"q", "b"}}, {"a;", "b;", "c", "b"}, 2) == 0.5);
    CHECK_THROWS_AS(fix_at_k({{"a", "b"}}, {"a"}, 1), EvalError);
    CHECK(fix_at_k({}, {}, 1) == 0.0);

    std::mt19937 rng(23);
    for (int round = 0; round < 50; ++round) {
        std::vector<std::vector<std::string>> full;
        std::vector<std::string> truths;
        for (int i = 0; i < 50; ++i) {
            truths.push_back(join(random_stream(rng, 4, 3)));
            std::vector<std::string> cands;
            for (int j = 0; j < 5; ++j) cands.push_back(rng() % 4 == 0 ? truths.back() : join(random_stream(rng, 4, 3)));
            full.push_back(cands);
        }
        double prev = 0.0;
        for (std::size_t k : {1u, 3u, 5u}) {
            std::vector<std::vector<std::string>> first;
            for (const auto& c : full) first.emplace_back(c.begin(), c.begin() + k);
            const double got = fix_at_k(first, truths, k);
            CHECK(got == oracle::fix_rate(first, truths));
            CHECK(got >= prev);
            prev = got;
        }
    }
}

TEST_CASE("bug-type classifier on hand-built pairs") {
    CHECK(classify_bug_type("a b c", "a c") == BugType::SimpleDelete);
    CHECK(classify_bug_type("if ( x && y )", "if ( x )") == BugType::SimpleDelete);
    CHECK(classify_bug_type("return x . trim ( ) ;", "return x ;") == BugType::SimpleDelete);

    CHECK(classify_bug_type("a c", "a b c") == BugType::SimpleInsert);
    CHECK(classify_bug_type("if ( x )", "if ( x != null )") == BugType::SimpleInsert);
    CHECK(classify_bug_type("foo ( ) ;", "this . foo ( ) ;") == BugType::SimpleInsert);

    CHECK(classify_bug_type("i < n - 1", "i < n + 1") == BugType::SimpleReplace);
    CHECK(classify_bug_type("return x ;", "return y ;") == BugType::SimpleReplace);
    CHECK(classify_bug_type("foo ( a , b )", "bar ( a , c )") == BugType::SimpleReplace);

    CHECK(classify_bug_type("return x ;", "return y + 1 ;") == BugType::Mixed);
    CHECK(classify_bug_type("a b", "c") == BugType::Mixed);
    CHECK(classify_bug_type("if ( a ) x ;", "if ( b ) { x ; }") == BugType::Mixed);

    CHECK_THROWS_AS(classify_bug_type("a  b", "a b"), EvalError);
}

TEST_CASE("edit script tie-breaking prefers substitution") {
    // "a b" -> "b a" costs 2 either as two substitutions or delete + insert
    const auto ops = edit_script(TokenStream({"a", "b"}), TokenStream({"b", "a"}));
    CHECK(ops == std::vector<EditOp>{EditOp::Substitute, EditOp::Substitute});
}

TEST_CASE("hunk_pair and instance labels") {
    for (auto type : kBugTypes) {
        const auto inst = typed_instance(type, 4);
        const auto [from, to] = hunk_pair(inst);
        CHECK(from == tokenize(typed_hunks(type, 4).first));
        CHECK(to == tokenize(typed_hunks(type, 4).second));
        CHECK(instance_bug_type(inst) == type);
    }
    BugInstance odd;
    odd.buggy_method = "int f ( ) { return 1 ; }";
    odd.fixed_method = "int g ( ) { return 2 ; }";
    odd.buggy_hunk = "return 1 ;";
    // fixed method does not keep the text around the hunk: trimmed diff
    CHECK(instance_bug_type(odd) == BugType::SimpleReplace);
}

TEST_CASE("apply_patch accepts hunk replacements and whole methods") {
    const auto inst = typed_instance(BugType::SimpleReplace, 2);
    CHECK(exact_match(apply_patch(inst, "v2 = z"), inst.fixed_method));
    CHECK(exact_match(apply_patch(inst, inst.fixed_method), inst.fixed_method));
    CHECK_FALSE(exact_match(apply_patch(inst, "v2 = y"), inst.fixed_method));
}

TEST_CASE("overlap matrix") {
    SUBCASE("identical sets") {
        const auto r = overlap_matrix({{"a", {"1", "2"}}, {"b", {"1", "2"}}});
        CHECK(r.matrix[0][1] == 1.0);
        CHECK(r.matrix[1][0] == 1.0);
        CHECK(r.unique_fixed.at("a") == 0);
        CHECK(r.unique_fixed.at("b") == 0);
    }
    SUBCASE("disjoint sets") {
        const auto r = overlap_matrix({{"a", {"1", "2"}}, {"b", {"3"}}});
        CHECK(r.matrix[0][1] == 0.0);
        CHECK(r.unique_fixed.at("a") == 2);
        CHECK(r.unique_fixed.at("b") == 1);
        CHECK(r.matrix[0][0] == 2.0);
    }
    SUBCASE("partial overlap is row-normalized") {
        const auto r = overlap_matrix({{"a", {"1", "2", "3", "4"}}, {"b", {"1"}}, {"c", {"1", "2", "9"}}});
        CHECK(r.matrix[0][1] == 0.25);
        CHECK(r.matrix[0][2] == 0.5);
        CHECK(r.matrix[1][0] == 1.0);
        CHECK(r.unique_fixed.at("a") == 2);
        CHECK(r.unique_fixed.at("c") == 1);
    }
}

TEST_CASE("rounding and formatting") {
    CHECK(format_percent(0.33965) == "33.97");
    CHECK(format_percent(1057.0 / 3112.0) == "33.97");
    CHECK(format_percent(455.0 / 3112.0) == "14.62");
    CHECK(format_percent(1.0) == "100.00");
    CHECK(format_percent(0.0) == "0.00");
    CHECK(format_fixed(2.675, 2) == "2.68");
    CHECK(format_fixed(0.125, 2) == "0.13");
    CHECK(round_half_up(-1.5, 0) == -2.0);
}

TEST_CASE("paired t-test") {
    const std::vector<double> a{1, 1, 1, 0}, b{0, 0, 1, 0};
    const auto r = paired_t_test(a, b);
    CHECK(r.t_statistic == doctest::Approx(1.7320508075688774).epsilon(1e-12));
    // reference p-values from scipy.stats.ttest_rel / t.sf
    CHECK(r.p_value == doctest::Approx(0.18169011381620923).epsilon(1e-9));
    CHECK_FALSE(r.degenerate);

    const std::vector<double> c{1, 0, 1, 1, 0, 1, 1, 1, 0, 1}, d{0, 0, 1, 0, 0, 1, 0, 1, 0, 0};
    const auto r2 = paired_t_test(c, d);
    CHECK(r2.t_statistic == doctest::Approx(2.4494897427831783));
    CHECK(r2.p_value == doctest::Approx(0.03678749787978613).epsilon(1e-9));

    CHECK(student_t_two_sided_p(2.0, 5) == doctest::Approx(0.10193947882985828).epsilon(1e-9));
    CHECK(student_t_two_sided_p(0.5, 10) == doctest::Approx(0.6278936057429729).epsilon(1e-9));
    CHECK(student_t_two_sided_p(10.0, 30) == doctest::Approx(4.5752514082296097e-11).epsilon(1e-6));
    CHECK(student_t_two_sided_p(0.0, 4) == doctest::Approx(1.0));

    const auto zero = paired_t_test(a, a);
    CHECK(zero.degenerate);
    CHECK(std::isnan(zero.t_statistic));
    CHECK(zero.p_value == 1.0);

    const std::vector<double> ones{1, 1, 1}, zeros{0, 0, 0};
    const auto shifted = paired_t_test(ones, zeros);
    CHECK(shifted.degenerate);
    CHECK(std::isinf(shifted.t_statistic));
    CHECK(shifted.p_value == 0.0);

    CHECK_THROWS_AS(paired_t_test(std::vector<double>{1}, std::vector<double>{0}), std::invalid_argument);
    CHECK_THROWS_AS(paired_t_test(a, ones), std::invalid_argument);
}

TEST_CASE("per-type counts sum to the fixed total on a 50-instance evaluation") {
    std::mt19937 rng(31);
    std::vector<BugInstance> corpus;
    ModelCandidates cands;
    std::map<std::size_t, std::size_t> expected_fixed;
    for (int n = 0; n < 50; ++n) {
        const auto type = kBugTypes[rng() % 4];
        corpus.push_back(typed_instance(type, n));
        const auto [bad, good] = typed_hunks(type, n);
        std::vector<std::string> list;
        const int correct_at = static_cast<int>(rng() % 7);  // 5 and 6 mean never
        for (int j = 0; j < 5; ++j) list.push_back(j == correct_at ? good : bad);
        if (n % 11 == 0) list.clear();
        for (std::size_t k : {1u, 3u, 5u}) {
            bool hit = false;
            for (std::size_t j = 0; j < std::min<std::size_t>(k, list.size()); ++j) hit = hit || list[j] == good;
            expected_fixed[k] += hit;
        }
        if (!list.empty()) cands[corpus.back().id] = list;
    }
    const auto m = evaluate_model(corpus, cands, MetricConfig{});
    CHECK(m.missing == 5);
    for (std::size_t k : {1u, 3u, 5u}) {
        std::size_t sum = 0;
        std::size_t total = 0;
        for (const auto& [t, c] : m.per_type) {
            sum += c.fixed.at(k);
            total += c.total;
        }
        CHECK(sum == m.fixed_at_k.at(k));
        CHECK(total == 50);
        CHECK(m.fixed_at_k.at(k) == expected_fixed[k]);
        CHECK(m.fix_at_k.at(k) == doctest::Approx(double(expected_fixed[k]) / 50.0));
    }
    CHECK(m.fix_at_k.at(1) <= m.fix_at_k.at(3));
    CHECK(m.fix_at_k.at(3) <= m.fix_at_k.at(5));
}

TEST_CASE("two-model report") {
    std::vector<BugInstance> corpus;
    for (int n = 0; n < 4; ++n) corpus.push_back(typed_instance(kBugTypes[n], n));
    auto good = [&](int n) { return typed_hunks(kBugTypes[n], n).second; };
    std::map<std::string, ModelCandidates> models;
    models["alpha"] = {{"syn0", {good(0)}}, {"syn1", {good(1)}}, {"syn2", {"nope"}}, {"syn3", {good(3)}}};
    models["beta"] = {{"syn0", {good(0)}}, {"syn1", {"nope"}}, {"syn2", {"nope"}}};
    const auto report = evaluate(corpus, models, MetricConfig{{1}});

    CHECK(report.models.at("alpha").fix_at_k.at(1) == 0.75);
    CHECK(report.models.at("beta").fix_at_k.at(1) == 0.25);
    CHECK(report.models.at("beta").missing == 1);
    CHECK(report.overlap.models == std::vector<std::string>{"alpha", "beta"});
    CHECK(report.overlap.matrix[0][1] == doctest::Approx(1.0 / 3.0));
    CHECK(report.overlap.matrix[1][0] == 1.0);
    CHECK(report.overlap.unique_fixed.at("alpha") == 2);
    CHECK(report.overlap.unique_fixed.at("beta") == 0);
    // d = [0, 1, 0, 1]: mean .5, sd .57735, t = .5 * 2 / .57735
    const auto& t = report.t_tests.at("alpha vs beta");
    CHECK(t.t_statistic == doctest::Approx(1.7320508075688774));

    const auto j = report_to_json(report);
    CHECK(j["models"]["alpha"]["fix_at_k"]["1"] == 75.0);
    CHECK(j["overlap"]["matrix"][0][1] == 33.33);
    const auto text = render_report(report, ReportFormat::Json);
    CHECK(render_report(report_from_json(json::parse(text)), ReportFormat::Json) == text);
    const auto md = render_report(report, ReportFormat::Markdown);
    CHECK(md.find("| alpha | 4 | 75.00 |") != std::string::npos);
    CHECK(md.find("| alpha vs beta | 1.7321 | 0.1817 |") != std::string::npos);
}

TEST_CASE("empty report renders") {
    const auto r = evaluate({}, {}, MetricConfig{});
    CHECK(render_report(r, ReportFormat::Markdown).find("No models evaluated.") != std::string::npos);
    const auto j = json::parse(render_report(r, ReportFormat::Json));
    CHECK(j["models"].empty());
    CHECK(j["k_values"] == json::array({1, 3, 5}));
}

TEST_CASE("metric config validation") {
    CHECK_THROWS_AS((MetricConfig{std::vector<std::size_t>{}}.validate()), EvalError);
    CHECK_THROWS_AS((MetricConfig{{0, 1}}.validate()), EvalError);
    CHECK_THROWS_AS((MetricConfig{{3, 1}}.validate()), EvalError);
    CHECK_NOTHROW((MetricConfig{{1, 3, 5}}.validate()));
}
