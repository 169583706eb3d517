#include <drlyap/weights_io.hpp>

#include "json_util.hpp"

#include <fstream>
#include <sstream>

namespace drlyap {

namespace {

nlohmann::json net_to_json(const DenseNet& net) {
  nlohmann::json j;
  j["format_version"] = kWeightsFormatVersion;
  j["layer_widths"] = net.layer_widths();
  j["seed"] = net.seed();
  auto weights = nlohmann::json::array();
  auto biases = nlohmann::json::array();
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& layer = net.layer(l);
    auto rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      auto row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) row.push_back(layer.weight(r, c));
      rows.push_back(std::move(row));
    }
    weights.push_back(std::move(rows));
    biases.push_back(detail::vec_to_json(layer.bias));
  }
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
  return j;
}

}  // namespace

std::string weights_to_json(const DenseNet& net) { return net_to_json(net).dump(1); }

DenseNet weights_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("weights file: ") + e.what());
  }
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kWeightsFormatVersion) {
      throw ConfigError("weights file: unsupported format_version " + std::to_string(version));
    }
    DenseNet net(j.at("layer_widths").get<std::vector<int>>());
    net.set_seed(j.at("seed").get<std::uint64_t>());
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != net.num_layers() || biases.size() != net.num_layers()) {
      throw ConfigError("weights file: layer count does not match layer_widths");
    }
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      auto& layer = net.layer(l);
      const auto& rows = weights[l];
      if (static_cast<Eigen::Index>(rows.size()) != layer.weight.rows()) {
        throw ConfigError("weights file: weight rows mismatch in layer " + std::to_string(l));
      }
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        const auto& row = rows[static_cast<std::size_t>(r)];
        if (static_cast<Eigen::Index>(row.size()) != layer.weight.cols()) {
          throw ConfigError("weights file: weight cols mismatch in layer " + std::to_string(l));
        }
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
          layer.weight(r, c) = row[static_cast<std::size_t>(c)].get<double>();
        }
      }
      layer.bias = detail::vec_from_json(biases[l]);
      if (layer.bias.size() != layer.weight.rows()) {
        throw ConfigError("weights file: bias size mismatch in layer " + std::to_string(l));
      }
    }
    if (!net.flatten().allFinite()) throw ConfigError("weights file: non-finite parameter");
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("weights file: ") + e.what());
  }
}

void save_weights(const DenseNet& net, const std::filesystem::path& path) {
  detail::write_text_file(path, weights_to_json(net) + "\n");
}

DenseNet load_weights(const std::filesystem::path& path) {
  return weights_from_json(detail::read_text_file(path));
}

}  // namespace drlyap
