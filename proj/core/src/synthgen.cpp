#include "refhist/synthgen.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "default_profiles.hpp"
#include "refhist/seeding.hpp"

namespace refhist {

void ClassProfile::validate() const {
    for (double e : extent)
        if (!(e > 0.0)) throw std::invalid_argument("profile extents must be positive");
    if (doppler_spread < 0.0 || rcs_spread < 0.0)
        throw std::invalid_argument("profile spreads must be >= 0");
    for (double p : missing_prob)
        if (p < 0.0 || p >= 1.0)
            throw std::invalid_argument("missing probabilities must be in [0,1)");
    if (points_min < 1 || points_max < points_min)
        throw std::invalid_argument("point count range must satisfy 1 <= min <= max");
    if (track_min < 1 || track_max < track_min)
        throw std::invalid_argument("track length range must satisfy 1 <= min <= max");
}

void SceneConfig::validate() const {
    if (version < 1) throw std::invalid_argument("scene config version must be >= 1");
    for (const ClassProfile& p : profiles) p.validate();
}

namespace {

using nlohmann::json;

ClassProfile profile_from_json(const json& obj) {
    ClassProfile p;
    const auto extent = obj.at("extent").get<std::vector<double>>();
    if (extent.size() != 3) throw std::runtime_error("profile extent must have 3 entries");
    std::copy(extent.begin(), extent.end(), p.extent.begin());
    p.z_offset = obj.at("z_offset").get<double>();
    p.doppler_spread = obj.at("doppler_spread").get<double>();
    p.rcs_mean = obj.at("rcs_mean").get<double>();
    p.rcs_spread = obj.at("rcs_spread").get<double>();
    const auto pts = obj.at("points").get<std::vector<int>>();
    if (pts.size() != 2) throw std::runtime_error("profile points must be [min,max]");
    p.points_min = pts[0];
    p.points_max = pts[1];
    const auto miss = obj.at("missing_prob").get<std::vector<double>>();
    if (miss.size() != kNumFeatures)
        throw std::runtime_error("profile missing_prob must have 6 entries");
    std::copy(miss.begin(), miss.end(), p.missing_prob.begin());
    const auto track = obj.at("track_length").get<std::vector<int>>();
    if (track.size() != 2) throw std::runtime_error("profile track_length must be [min,max]");
    p.track_min = track[0];
    p.track_max = track[1];
    return p;
}

json profile_to_json(const ClassProfile& p) {
    return json{{"extent", p.extent},
                {"z_offset", p.z_offset},
                {"doppler_spread", p.doppler_spread},
                {"rcs_mean", p.rcs_mean},
                {"rcs_spread", p.rcs_spread},
                {"points", std::array<int, 2>{p.points_min, p.points_max}},
                {"missing_prob", p.missing_prob},
                {"track_length", std::array<int, 2>{p.track_min, p.track_max}}};
}

double draw_normal(std::mt19937_64& rng, double mean, double sigma) {
    if (sigma <= 0.0) return mean;
    std::normal_distribution<double> dist(mean, sigma);
    return dist(rng);
}

}  // namespace

SceneConfig scene_config_from_json(const std::string& text) {
    json obj = json::parse(text);
    SceneConfig cfg;
    cfg.version = obj.at("version").get<int>();
    cfg.seed = obj.value("seed", std::uint64_t{0});
    const json& budgets = obj.at("budgets");
    const json& profiles = obj.at("profiles");
    for (int c = 0; c < kNumClasses; ++c) {
        const auto name = std::string(to_string(static_cast<ClassId>(c)));
        cfg.budgets[c] = budgets.at(name).get<std::size_t>();
        cfg.profiles[c] = profile_from_json(profiles.at(name));
    }
    cfg.validate();
    return cfg;
}

std::string scene_config_to_json(const SceneConfig& cfg) {
    json budgets, profiles;
    for (int c = 0; c < kNumClasses; ++c) {
        const auto name = std::string(to_string(static_cast<ClassId>(c)));
        budgets[name] = cfg.budgets[c];
        profiles[name] = profile_to_json(cfg.profiles[c]);
    }
    json obj;
    obj["version"] = cfg.version;
    obj["seed"] = cfg.seed;
    obj["budgets"] = std::move(budgets);
    obj["profiles"] = std::move(profiles);
    return obj.dump(2);
}

SceneConfig load_scene_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open profile config: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return scene_config_from_json(ss.str());
}

SceneConfig default_scene_config() {
    return scene_config_from_json(detail::kDefaultProfilesJson);
}

Dataset generate(const SceneConfig& cfg) {
    cfg.validate();
    Dataset out;
    std::mt19937_64 rng(derive_seed(cfg.seed, "synthgen"));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (int c = 0; c < kNumClasses; ++c) {
        const ClassProfile& prof = cfg.profiles[c];
        const auto class_name = std::string(to_string(static_cast<ClassId>(c)));
        std::size_t remaining = cfg.budgets[c];
        std::size_t track_counter = 0;

        std::uniform_int_distribution<int> track_len(prof.track_min, prof.track_max);
        std::uniform_int_distribution<int> point_count(prof.points_min, prof.points_max);
        std::uniform_real_distribution<double> range_dist(12.0, 80.0);
        std::uniform_real_distribution<double> bearing_dist(-1.0, 1.0);

        while (remaining > 0) {
            const std::size_t length =
                std::min<std::size_t>(static_cast<std::size_t>(track_len(rng)), remaining);
            char track_id[64];
            std::snprintf(track_id, sizeof(track_id), "%s-%05zu", class_name.c_str(),
                          track_counter++);

            // Latent per-track object state.
            const double range = range_dist(rng);
            const double bearing = bearing_dist(rng);
            double cx = range * std::cos(bearing);
            double cy = range * std::sin(bearing);
            const double velocity = draw_normal(rng, 0.0, prof.doppler_spread);
            const double rcs_base = draw_normal(rng, prof.rcs_mean, prof.rcs_spread);

            for (std::size_t cycle = 0; cycle < length; ++cycle) {
                cx += draw_normal(rng, 0.0, 0.25);
                cy += draw_normal(rng, 0.0, 0.25);

                PointCloud cloud;
                cloud.label = static_cast<ClassId>(c);
                cloud.track_id = track_id;
                const int n = point_count(rng);
                cloud.points.reserve(n);
                for (int i = 0; i < n; ++i) {
                    std::uniform_real_distribution<double> dx(-prof.extent[0], prof.extent[0]);
                    std::uniform_real_distribution<double> dy(-prof.extent[1], prof.extent[1]);
                    std::uniform_real_distribution<double> dz(-prof.extent[2], prof.extent[2]);
                    const double ox = dx(rng), oy = dy(rng), oz = dz(rng);
                    const double z = prof.z_offset + oz;
                    const double radial =
                        std::sqrt((cx + ox) * (cx + ox) + (cy + oy) * (cy + oy) + z * z);
                    const double doppler = velocity + draw_normal(rng, 0.0, 0.15);
                    const double rcs = rcs_base + draw_normal(rng, 0.0, 1.5);

                    Point p;
                    p[static_cast<int>(FeatureKind::X)] = ox;
                    p[static_cast<int>(FeatureKind::Y)] = oy;
                    p[static_cast<int>(FeatureKind::Z)] = z;
                    p[static_cast<int>(FeatureKind::RadialDistance)] = radial;
                    p[static_cast<int>(FeatureKind::DopplerVelocity)] = doppler;
                    p[static_cast<int>(FeatureKind::Rcs)] = rcs;
                    for (int f = 0; f < kNumFeatures; ++f)
                        if (unit(rng) < prof.missing_prob[f]) p[f] = std::nullopt;
                    // Keep the range measurement if everything was masked.
                    if (all_missing(p))
                        p[static_cast<int>(FeatureKind::RadialDistance)] = radial;
                    cloud.points.push_back(p);
                }
                cloud.validate();
                out.samples.push_back(std::move(cloud));
            }
            remaining -= length;
        }
    }
    return out;
}

}  // namespace refhist
