#include <doctest.h>
TEST_SUITE_BEGIN("editor_loop");
TEST_SUITE_END();
