#include "refhist/model_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace refhist {

AnyModel load_any_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();

    const auto obj = nlohmann::json::parse(text);
    const std::string kind = obj.value("kind", "mlp");
    if (kind == "mlp") return model_from_json(text);
    if (kind == "pointnet") return pointnet_from_json(text);
    throw std::runtime_error("unknown model kind '" + kind + "' in " + path.string());
}

}  // namespace refhist
