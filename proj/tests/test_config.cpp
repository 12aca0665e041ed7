#include <doctest.h>

#include <cstdio>

#include "css/config.hpp"

using namespace css;

TEST_CASE("config: parse sections, keys, comments, trimming") {
  const Config c = Config::parse(
      "# leading comment\n"
      "\n"
      "[alpha]\n"
      "  name = water tank  \n"
      "count=3\n"
      "; another comment\n"
      "[beta]\n"
      "ratio = -2.5e-1\n"
      "flag = yes\n",
      "test.ini");
  CHECK(c.get_string("alpha", "name") == "water tank");
  CHECK(c.get_int("alpha", "count") == 3);
  CHECK(c.get_double("beta", "ratio") == doctest::Approx(-0.25).epsilon(0.0));
  CHECK(c.get_bool("beta", "flag"));
  CHECK(c.has("alpha", "count"));
  CHECK_FALSE(c.has("alpha", "ratio"));
  CHECK(c.line_of("beta", "ratio") == 8);
  CHECK(c.line_of("beta", "nope") == 0);
}

TEST_CASE("config: parse errors carry line numbers") {
  CHECK_THROWS_WITH_AS(Config::parse("[open\n", "t"),
                       doctest::Contains("unterminated"), ConfigError);
  CHECK_THROWS_WITH_AS(Config::parse("[a] junk\n", "t"),
                       doctest::Contains("trailing"), ConfigError);
  CHECK_THROWS_WITH_AS(Config::parse("[]\n", "t"),
                       doctest::Contains("empty section"), ConfigError);
  CHECK_THROWS_WITH_AS(Config::parse("key = 1\n", "t"),
                       doctest::Contains("before any"), ConfigError);
  CHECK_THROWS_WITH_AS(Config::parse("[a]\nnot a pair\n", "t"),
                       doctest::Contains("key = value"), ConfigError);
  CHECK_THROWS_WITH_AS(Config::parse("[a]\n = 1\n", "t"),
                       doctest::Contains("empty key"), ConfigError);
  try {
    Config::parse("[a]\nx = 1\ny = 2\nx = 3\n", "t");
    FAIL("duplicate key accepted");
  } catch (const ConfigError& e) {
    CHECK(e.line == 4);
    CHECK(std::string(e.what()).find("first set on line 2") !=
          std::string::npos);
  }
}

TEST_CASE("config: typed value errors name key and line") {
  const Config c =
      Config::parse("[s]\nd = 1.5x\ni = 7.2\nu = -4\nb = maybe\n", "t");
  CHECK_THROWS_WITH_AS(c.get_double("s", "d"),
                       doctest::Contains("not a real number"), ConfigError);
  CHECK_THROWS_WITH_AS(c.get_int("s", "i"),
                       doctest::Contains("not an integer"), ConfigError);
  CHECK_THROWS_WITH_AS(c.get_u64("s", "u"),
                       doctest::Contains("nonnegative"), ConfigError);
  CHECK_THROWS_WITH_AS(c.get_bool("s", "b"),
                       doctest::Contains("not a boolean"), ConfigError);
  try {
    c.get_double("s", "d");
    FAIL("bad double accepted");
  } catch (const ConfigError& e) {
    CHECK(e.line == 2);
  }
  CHECK_THROWS_WITH_AS(c.get_string("s", "absent"),
                       doctest::Contains("missing required key"), ConfigError);
}

TEST_CASE("config: defaulted lookups and u64 range") {
  const Config c = Config::parse(
      "[s]\nbig = 18446744073709551615\nseed = 42\n", "t");
  CHECK(c.get_u64("s", "big") == 18446744073709551615ull);
  CHECK(c.get_u64("s", "seed", 7) == 42);
  CHECK(c.get_u64("s", "missing", 7) == 7);
  CHECK(c.get_double("s", "missing", 1.25) == 1.25);
  CHECK(c.get_int("s", "missing", -3) == -3);
  CHECK(c.get_string("s", "missing", "dflt") == "dflt");
  CHECK(c.get_bool("s", "missing", true));
  // Present-but-malformed still throws even with a fallback.
  const Config d = Config::parse("[s]\nx = nope\n", "t");
  CHECK_THROWS_AS(d.get_double("s", "x", 1.0), ConfigError);
}

TEST_CASE("config: lists") {
  const Config c = Config::parse(
      "[s]\nsigmas = 0 0.01  0.1\t1\nnames = lorenz thomas\nempty =\n", "t");
  const auto v = c.get_double_list("s", "sigmas");
  REQUIRE(v.size() == 4);
  CHECK(v[0] == 0.0);
  CHECK(v[1] == 0.01);
  CHECK(v[2] == 0.1);
  CHECK(v[3] == 1.0);
  const auto names = c.get_string_list("s", "names");
  REQUIRE(names.size() == 2);
  CHECK(names[0] == "lorenz");
  CHECK(names[1] == "thomas");
  CHECK(c.get_double_list("s", "empty").empty());
  CHECK_THROWS_AS(c.get_double_list("s", "names"), ConfigError);
}

TEST_CASE("config: consumption tracking flags typos") {
  const Config c = Config::parse(
      "[tank]\nnx = 64\nny = 64\ngravty = 9.8\n", "t");
  CHECK(c.get_int("tank", "nx") == 64);
  CHECK(c.get_int("tank", "ny") == 64);
  const auto extra = c.unconsumed();
  REQUIRE(extra.size() == 1);
  CHECK(extra[0] == "[tank] gravty (line 4)");
  CHECK_THROWS_WITH_AS(c.require_fully_consumed(),
                       doctest::Contains("unrecognized key"), ConfigError);
  CHECK_THROWS_WITH_AS(c.require_fully_consumed(),
                       doctest::Contains("gravty"), ConfigError);
  // Consuming the stray key clears the complaint.
  (void)c.get_double("tank", "gravty");
  CHECK_NOTHROW(c.require_fully_consumed());
}

TEST_CASE("config: canonical text round-trips") {
  const std::string text =
      "# comment\n[alpha]\nx = 1\ny = two words\n\n[beta]\nz = 3\n";
  const Config c = Config::parse(text, "t");
  const std::string canon = c.canonical_text();
  CHECK(canon == "[alpha]\nx = 1\ny = two words\n\n[beta]\nz = 3\n");
  // Reparsing the canonical text reproduces it exactly (fixed point).
  CHECK(Config::parse(canon, "t2").canonical_text() == canon);
}

TEST_CASE("config: load from file and missing file") {
  const std::string path = "/tmp/css_test_config.ini";
  write_file_atomic(path, "[s]\nk = v\n");
  const Config c = Config::load(path);
  CHECK(c.origin() == path);
  CHECK(c.get_string("s", "k") == "v");
  std::remove(path.c_str());
  CHECK_THROWS_AS(Config::load("/tmp/css_no_such_file.ini"), ConfigError);
}
