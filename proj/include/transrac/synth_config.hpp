#pragma once

// JSON form of SynthSetSpec for the `synth` command. Keys are the field names;
// unknown keys are rejected.

#include <string>

#include <json.hpp>

#include "transrac/data.hpp"
#include "transrac/error.hpp"

namespace transrac {

inline SynthSetSpec parse_synth_set_spec(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("synth spec: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("synth spec must be a JSON object");
  SynthSetSpec s;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "num_videos") s.num_videos = v.get<int>();
      else if (key == "num_cycles_min") s.num_cycles_min = v.get<int>();
      else if (key == "num_cycles_max") s.num_cycles_max = v.get<int>();
      else if (key == "cycle_length_min") s.cycle_length_min = v.get<int>();
      else if (key == "cycle_length_max") s.cycle_length_max = v.get<int>();
      else if (key == "jitter") s.jitter = v.get<double>();
      else if (key == "noise_sigma") s.noise_sigma = v.get<double>();
      else if (key == "max_interruptions") s.max_interruptions = v.get<int>();
      else if (key == "interruption_length_min") s.interruption_length_min = v.get<int>();
      else if (key == "interruption_length_max") s.interruption_length_max = v.get<int>();
      else if (key == "feature_dim") s.feature_dim = v.get<int>();
      else if (key == "grid_h") s.grid_h = v.get<int>();
      else if (key == "grid_w") s.grid_w = v.get<int>();
      else if (key == "fps") s.fps = v.get<double>();
      else if (key == "action_types") s.action_types = v.get<std::vector<std::string>>();
      else if (key == "id_prefix") s.id_prefix = v.get<std::string>();
      else throw ValidationError("synth spec: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("synth spec: ") + e.what());
  }
  return s;
}

}  // namespace transrac
