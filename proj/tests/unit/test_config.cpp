#include "doctest.h"

#include <functional>

#include "pod/config.hpp"
#include "pod/error.hpp"

using namespace pod;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Usage;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = Config::parse(
      "# leading comment\n"
      "seed = 7\n"
      "\n"
      "[train]\n"
      "  epochs=30   # trailing comment\n"
      "report = \"out dir/report #1.csv\"\n"
      "[ generate ]\n"
      "target = enemies=2;nearest_enemy=4\n");
  CHECK(c.get("seed") == "7");
  CHECK(c.get("train.epochs") == "30");
  CHECK(c.get("train.report") == "out dir/report #1.csv");
  CHECK(c.get("generate.target") == "enemies=2;nearest_enemy=4");
  CHECK_FALSE(c.get("epochs").has_value());
  CHECK(c.contains("seed"));
  CHECK(c.values().size() == 4);

  CHECK(kind_of([] { Config::parse("[train\nx = 1\n"); }) == ErrorKind::Config);
  CHECK(kind_of([] { Config::parse("just words\n"); }) == ErrorKind::Config);
  CHECK(kind_of([] { Config::parse(" = 3\n"); }) == ErrorKind::Config);
  CHECK(kind_of([] { Config::parse("x = \"open\n"); }) == ErrorKind::Config);
  CHECK(kind_of([] { Config::load("/nonexistent/pod.cfg"); }) == ErrorKind::Io);
}

TEST_CASE("config digest") {
  const auto a = Config::parse("a = 1\nb = 2\n");
  const auto b = Config::parse("b = 2\n# reordered\na = 1\n");
  const auto c = Config::parse("a = 1\nb = 3\n");
  CHECK(a.digest() == b.digest());
  CHECK(a.digest() != c.digest());
  CHECK(Config{}.digest() == Config{}.digest());
}

TEST_CASE("value parsers") {
  CHECK(parse_int("-12", "x") == -12);
  CHECK(parse_u64("18446744073709551615", "x") == 18446744073709551615ull);
  CHECK(parse_double("0.25", "x") == 0.25);
  CHECK(parse_double("1e-3", "x") == 1e-3);
  CHECK(parse_bool("yes", "x"));
  CHECK_FALSE(parse_bool("off", "x"));
  CHECK(kind_of([] { parse_int("12abc", "x"); }) == ErrorKind::Config);
  CHECK(kind_of([] { parse_int("", "x"); }) == ErrorKind::Config);
  CHECK(kind_of([] { parse_u64("-1", "x"); }) == ErrorKind::Config);
  CHECK(kind_of([] { parse_double("nope", "x"); }) == ErrorKind::Config);
  CHECK(kind_of([] { parse_double("1.5x", "x"); }) == ErrorKind::Config);
  CHECK(kind_of([] { parse_bool("maybe", "x"); }) == ErrorKind::Config);
}
