#pragma once

// YAML readers shared by the config loaders. Missing keys keep their defaults.

#include <yaml-cpp/yaml.h>

#include "langact/model.hpp"
#include "langact/train.hpp"

namespace langact::detail {

template <typename F>
void read_key(const YAML::Node& node, const char* key, F& field) {
    if (node && node[key]) field = node[key].as<F>();
}

void read_model(const YAML::Node& node, ModelConfig& c);
void read_train(const YAML::Node& node, TrainConfig& c);

}  // namespace langact::detail
