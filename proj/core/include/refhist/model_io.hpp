#pragma once

#include <filesystem>
#include <variant>

#include "refhist/baseline.hpp"
#include "refhist/network.hpp"

namespace refhist {

using AnyModel = std::variant<MlpModel, PointNetModel>;

// Dispatches on the checkpoint's "kind" tag ("mlp" / "pointnet").
AnyModel load_any_model(const std::filesystem::path& path);

}  // namespace refhist
