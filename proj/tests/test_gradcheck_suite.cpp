#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ssgan/gradcheck_suite.hpp"

using namespace ssgan;

TEST_CASE("the full gradient suite passes at its pinned tolerance") {
    GradSuiteReport report = run_gradient_suite(7);
    INFO(report.str());
    CHECK(report.cases.size() == 14);
    for (const auto& c : report.cases) {
        INFO(c.name);
        CHECK(c.max_rel_error <= c.tolerance);
        CHECK(c.redraws <= 25);
    }
    CHECK(report.all_passed());
}

TEST_CASE("the suite is seed-stable") {
    GradSuiteReport a = run_gradient_suite(123);
    GradSuiteReport b = run_gradient_suite(123);
    REQUIRE(a.cases.size() == b.cases.size());
    for (std::size_t i = 0; i < a.cases.size(); ++i) {
        CHECK(a.cases[i].max_rel_error == b.cases[i].max_rel_error);
        CHECK(a.cases[i].redraws == b.cases[i].redraws);
    }
    CHECK(a.all_passed());
}
