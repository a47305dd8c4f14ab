#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "rflab/flow.hpp"

TEST_CASE("placeholder") { CHECK(true); }
