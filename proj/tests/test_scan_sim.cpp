#include <doctest.h>
TEST_SUITE_BEGIN("scan_sim");
TEST_SUITE_END();
