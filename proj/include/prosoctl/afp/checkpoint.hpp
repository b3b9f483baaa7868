// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "prosoctl/afp/model.hpp"

namespace prosoctl::afp {

inline constexpr int kCheckpointFormat = 1;

inline nlohmann::json to_json(const AfpCheckpoint& ckpt) {
  nlohmann::json j;
  j["format"] = "prosoctl-afp";
  j["format_version"] = ckpt.format_version;
  j["seed"] = ckpt.seed;
  j["iteration"] = ckpt.iteration;
  j["stats_version"] = ckpt.stats_version;
  j["dims"] = {{"phone_dim", ckpt.dims.phone_dim},
               {"speaker_dim", ckpt.dims.speaker_dim},
               {"layer_units", ckpt.dims.layer_units},
               {"dense_units", ckpt.dims.dense_units}};
  j["phone_symbols"] = ckpt.phone_symbols;
  j["speaker_ids"] = ckpt.speaker_ids;
  nlohmann::json tensors = nlohmann::json::array();
  visit_tensors(ckpt.weights, [&](const std::string& name, const Matrix<double>& m) {
    tensors.push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}, {"data", m.data()}});
  });
  j["tensors"] = std::move(tensors);
  return j;
}

inline AfpCheckpoint checkpoint_from_json(const nlohmann::json& j, const std::string& source) {
  const auto fail = [&](const std::string& msg) -> DataError {
    return DataError(source + ": " + msg);
  };
  try {
    if (j.value("format", "") != "prosoctl-afp") throw fail("not an afp checkpoint");
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointFormat) {
      throw VersionError(source + ": checkpoint format_version " + std::to_string(version) +
                         " is not supported (expected " + std::to_string(kCheckpointFormat) + ")");
    }
    AfpCheckpoint ckpt;
    ckpt.format_version = version;
    ckpt.seed = j.at("seed").get<std::uint64_t>();
    ckpt.iteration = j.at("iteration").get<std::uint64_t>();
    ckpt.stats_version = j.at("stats_version").get<std::string>();
    const auto& d = j.at("dims");
    ckpt.dims.phone_dim = d.at("phone_dim").get<std::size_t>();
    ckpt.dims.speaker_dim = d.at("speaker_dim").get<std::size_t>();
    ckpt.dims.layer_units = d.at("layer_units").get<std::vector<std::size_t>>();
    ckpt.dims.dense_units = d.at("dense_units").get<std::size_t>();
    ckpt.phone_symbols = j.at("phone_symbols").get<std::vector<std::string>>();
    ckpt.speaker_ids = j.at("speaker_ids").get<std::vector<std::string>>();
    ckpt.weights = zero_weights(ckpt.dims, ckpt.phone_symbols.size(), ckpt.speaker_ids.size());

    const auto& tensors = j.at("tensors");
    std::size_t index = 0;
    visit_tensors(ckpt.weights, [&](const std::string& name, Matrix<double>& m) {
      if (index >= tensors.size()) throw fail("missing tensor '" + name + "'");
      const auto& t = tensors[index++];
      if (t.at("name").get<std::string>() != name)
        throw fail("expected tensor '" + name + "', found '" + t.at("name").get<std::string>() +
                   "'");
      const auto shape = t.at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 2 || shape[0] != m.rows() || shape[1] != m.cols()) {
        throw fail("tensor '" + name + "' shape mismatch: expected " + std::to_string(m.rows()) +
                   "x" + std::to_string(m.cols()));
      }
      auto data = t.at("data").get<std::vector<double>>();
      if (data.size() != m.size()) throw fail("tensor '" + name + "' has wrong element count");
      m.data() = std::move(data);
    });
    if (index != tensors.size()) throw fail("unexpected extra tensors");
    validate_checkpoint(ckpt);
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("malformed checkpoint: ") + e.what());
  } catch (const VersionError&) {
    throw;
  } catch (const DataError& e) {
    const std::string what = e.what();
    if (what.rfind(source, 0) == 0) throw;
    throw fail(what);
  }
}

inline void save_checkpoint(const std::string& path, const AfpCheckpoint& ckpt) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw DataError("cannot write checkpoint '" + path + "'");
    out << to_json(ckpt).dump() << '\n';
    if (!out) throw DataError("failed writing checkpoint '" + path + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline AfpCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read checkpoint '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
  return checkpoint_from_json(j, path);
}

}  // namespace prosoctl::afp
