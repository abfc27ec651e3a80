#pragma once

#include "mxhoi/experiment.hpp"

// Small experiment that trains in well under a second.
inline mxhoi::ExperimentConfig quick_config(std::uint64_t seed = 1) {
  mxhoi::ExperimentConfig c;
  c.run_id = "quick";
  c.world.n_images = 200;
  c.world.n_hoi_classes = 8;
  c.world.n_object_classes = 4;
  c.world.n_verb_classes = 2;
  c.world.feature_dim = 16;
  c.world.seed = seed;
  c.n_test_images = 120;
  c.hidden_dim = 16;
  c.iterations = 300;
  c.eval_every = 0;
  c.seed = seed;
  return c;
}
