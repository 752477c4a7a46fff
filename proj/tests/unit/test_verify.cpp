#include "doctest.h"

#include <cmath>

#include "gatedgeom/errors.hpp"
#include "gatedgeom/verify.hpp"
#include "json.hpp"

using namespace gatedgeom;

TEST_CASE("every check passes its tolerances") {
  VerifyOptions opt;
  opt.robustness_trials = 50;  // the full count runs in the acceptance suite
  for (const auto& id : verify_selectors()) {
    CAPTURE(id);
    const auto records = run_check(id, opt);
    CHECK_FALSE(records.empty());
    for (const auto& r : records) {
      CAPTURE(r.quantity);
      CAPTURE(r.measured);
      CHECK(r.theorem_id == id);
      CHECK(r.pass);
      CHECK(std::isfinite(r.measured));
    }
  }
}

TEST_CASE("depth-amplification emits one row per layer count plus the slope") {
  VerifyOptions opt;
  opt.depth_layers = {1, 2, 4, 8};
  const auto records = run_check("depth-amplification", opt);
  int gaps = 0, slopes = 0;
  for (const auto& r : records) {
    if (r.quantity.rfind("relative gap", 0) == 0) ++gaps;
    if (r.quantity.find("slope") != std::string::npos) {
      ++slopes;
      CHECK(r.expected == 2.0);
      CHECK(r.tolerance == 0.01);
    }
  }
  CHECK(gaps == 4);
  CHECK(slopes == 1);
  CHECK(all_passed(records));
}

TEST_CASE("unknown checks are rejected") {
  CHECK_THROWS_AS(run_check("thm9.9", VerifyOptions{}), ConfigError);
  CHECK_THROWS_AS(run_verify({"sphere-witness", "nope"}, VerifyOptions{}), ConfigError);
}

TEST_CASE("report json") {
  const auto records = run_verify({"sphere-witness"}, VerifyOptions{});
  const auto j = nlohmann::json::parse(verify_report_json(records));
  CHECK(j["pass"].get<bool>());
  REQUIRE(j["records"].size() == records.size());
  const auto& r = j["records"][0];
  for (const char* key : {"theorem_id", "quantity", "expected", "measured", "tolerance", "pass"}) CHECK(r.contains(key));
}
