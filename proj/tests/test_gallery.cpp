#include <catch_amalgamated.hpp>

#include "sode/gallery.hpp"

using namespace sode;

TEST_CASE("gallery listing") {
  auto names = gallery_list();
  REQUIRE(names.size() == 4);
  CHECK(names[0] == "worked-example");
  CHECK(names[1] == "torus");
  CHECK(names[2] == "rigid-body");
  CHECK(names[3] == "se2-canonical");
  for (const auto& n : names) CHECK_NOTHROW(gallery_get(n));
}

TEST_CASE("entries carry systems, states and provenance") {
  GalleryEntry torus = gallery_get("torus");
  REQUIRE(torus.system);
  CHECK(torus.system->dimension() == 2);
  REQUIRE_FALSE(torus.initial_states.empty());
  REQUIRE_FALSE(torus.expectations.empty());
  for (const auto& x : torus.expectations) {
    CHECK_FALSE(x.name.empty());
    CHECK_FALSE(x.provenance.empty());
  }

  GalleryEntry rb = gallery_get("rigid-body");
  CHECK_FALSE(rb.system);
  REQUIRE(rb.algebra);
  REQUIRE(rb.reduced);
  CHECK_NOTHROW(rb.lifted());

  GalleryEntry we = gallery_get("worked-example");
  CHECK_THROWS_AS(we.lifted(), std::logic_error);
}

TEST_CASE("unknown entries are rejected") {
  CHECK_THROWS_AS(gallery_get("nonexistent"), std::invalid_argument);
}

TEST_CASE("verification passes on every entry") {
  for (const auto& name : gallery_list()) {
    VerifyReport rep = gallery_verify(name);
    INFO("entry " << name);
    for (const auto& c : rep.checks) {
      INFO(c.name << ": error " << c.error << " tolerance " << c.tolerance);
      CHECK(c.pass);
    }
    CHECK(rep.all_pass);
    CHECK_FALSE(rep.checks.empty());
  }
}
