#pragma once

#include "eegfest/dataset.hpp"

namespace fixture {

// Few channels, short epochs and well separated classes: fast to featurize and train on.
inline eegfest::BenchmarkSpec small_spec() {
  eegfest::BenchmarkSpec spec;
  spec.channels = 4;
  spec.samples_per_channel = 400;
  spec.train_driving_subjects = 3;
  spec.train_non_driving_subjects = 2;
  spec.eval_driving_subjects = 2;
  spec.eval_non_driving_subjects = 2;
  spec.epochs_per_class = 24;
  spec.non_driving_epochs = 24;
  spec.drowsy = {1.0, 1.0, 3.0, 1.0, 0.5};
  spec.non_driving = {1.0, 1.0, 1.0, 1.0, 3.0};
  return spec;
}

inline const eegfest::SyntheticBenchmark& small_benchmark() {
  static const eegfest::SyntheticBenchmark bench = eegfest::make_benchmark(small_spec());
  return bench;
}

inline const eegfest::SamplePool& small_pool() {
  static const eegfest::SamplePool pool = eegfest::featurize(small_benchmark().epochs);
  return pool;
}

}  // namespace fixture
