#include <doctest.h>
TEST_SUITE_BEGIN("rollout_gen");
TEST_SUITE_END();
