#include <catch2/catch_amalgamated.hpp>
// bench-layer tests land here
