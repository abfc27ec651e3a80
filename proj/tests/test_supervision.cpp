#include <stdexcept>

#include <doctest.h>

#include "mxhoi/supervision.hpp"

using namespace mxhoi;

TEST_SUITE("supervision") {

TEST_CASE("route by tag") {
  const Route fs = route(SupervisionTag::FS, false, 1e-3, 1e-4);
  CHECK(fs.loss == LossKind::RegionLevel);
  CHECK(fs.buffer == MomentumBuffer::FullySupervised);
  CHECK(fs.step_size == 1e-4);

  const Route ws = route(SupervisionTag::WS, false, 1e-3, 1e-4);
  CHECK(ws.loss == LossKind::ImageLevel);
  CHECK(ws.buffer == MomentumBuffer::WeaklySupervised);
  CHECK(ws.step_size == 1e-3);

  const Route us = route(SupervisionTag::US, true, 1e-3, 1e-4);
  CHECK(us.loss == LossKind::RegionLevel);
  CHECK(us.buffer == MomentumBuffer::FullySupervised);
  CHECK(us.step_size == 1e-4);

  CHECK_THROWS_AS(route(SupervisionTag::US, false, 1e-3, 1e-4), std::invalid_argument);
}

TEST_CASE("tag names round-trip") {
  for (SupervisionTag t : {SupervisionTag::FS, SupervisionTag::WS, SupervisionTag::US})
    CHECK(parse_supervision(to_string(t)) == t);
  CHECK(to_string(SupervisionTag::WS) == "WS");
  CHECK_THROWS(parse_supervision("ws"));
  CHECK_THROWS(parse_supervision(""));
}

}
