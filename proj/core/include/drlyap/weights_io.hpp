#pragma once

// Weights file: {"format_version", "layer_widths", "weights", "biases", "seed"}
// with weights as nested row-major arrays. Doubles are written in shortest
// round-trip form, so save -> load reproduces every bit.

#include <drlyap/autodiff_nn.hpp>

#include <filesystem>
#include <string>

namespace drlyap {

inline constexpr int kWeightsFormatVersion = 1;

std::string weights_to_json(const DenseNet& net);
DenseNet weights_from_json(const std::string& text);

void save_weights(const DenseNet& net, const std::filesystem::path& path);
DenseNet load_weights(const std::filesystem::path& path);

}  // namespace drlyap
