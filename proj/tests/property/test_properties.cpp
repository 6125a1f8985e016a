#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "properties.hpp"

using namespace covar::testing;

namespace {

constexpr std::size_t kCases = 200;

void expect(const PropertyOutcome& out) {
    INFO("worst=" << out.worst << " first failure: " << out.first_failure);
    CHECK(out.cases == kCases);
    CHECK(out.failures == 0);
}

}  // namespace

TEST_CASE("roots reproduce the target loss") { expect(check_root_residuals(101, kCases)); }
TEST_CASE("root weights normalize") { expect(check_weight_normalization(102, kCases)); }
TEST_CASE("IS estimate is scale equivariant in Y") { expect(check_scale_equivariance(103, kCases)); }
TEST_CASE("replications do not depend on the worker count") { expect(check_thread_determinism(104, kCases)); }
TEST_CASE("rmse decomposes into bias and sd") { expect(check_rmse_identity(105, kCases)); }
