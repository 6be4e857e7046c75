#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include "core/simgen.hpp"
TEST_CASE("links") {
  penmeta::WeibullCurve c{4.55, 95.25};
  CHECK(penmeta::weibull_cdf(c, 0.0) == 0.0);
}
