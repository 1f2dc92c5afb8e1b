#pragma once

#include <optional>
#include <string>

#include "kel/json_util.hpp"
#include "kel/model.hpp"
#include "kel/sde.hpp"

namespace kel {

// Serializable description of a model: a preset with its parameters or an
// inline linear model, optionally with a constant second-block drift shift.
struct ModelSpec {
  std::string preset = "kinetic-ou";  // kinetic-ou | chain | granular | linear
  int d = 1;
  double beta = 1.0;
  double theta = 0.05;
  double alpha = 0.0;
  double b_amplitude = 0.0;
  double damping = 1.0;
  std::optional<Mat> B;  // granular coupling; inline linear B
  // inline linear model
  Mat A;
  Mat Z_matrix;
  Vec Z_offset;
  Mat sigma;
  std::optional<Vec> drift_shift;
};

BlockModel build_model(const ModelSpec& spec);
Json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const Json& j);

Json to_json(const InitialLaw& law);
InitialLaw initial_law_from_json(const Json& j, int dim);

}  // namespace kel
