#include "refhist/dataset_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace refhist {

namespace {

using nlohmann::json;

[[noreturn]] void fail(std::string_view source, std::size_t line_no, const std::string& what) {
    throw std::runtime_error(std::string(source) + ":" + std::to_string(line_no) + ": " + what);
}

PointCloud parse_line(const std::string& line, std::string_view source, std::size_t line_no) {
    json obj;
    try {
        obj = json::parse(line);
    } catch (const json::parse_error& e) {
        fail(source, line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) fail(source, line_no, "expected a JSON object");
    if (!obj.contains("track_id") || !obj["track_id"].is_string())
        fail(source, line_no, "missing string field 'track_id'");
    if (!obj.contains("label") || !obj["label"].is_string())
        fail(source, line_no, "missing string field 'label'");
    if (!obj.contains("points") || !obj["points"].is_array())
        fail(source, line_no, "missing array field 'points'");

    PointCloud cloud;
    cloud.track_id = obj["track_id"].get<std::string>();
    try {
        cloud.label = class_from_string(obj["label"].get<std::string>());
    } catch (const std::invalid_argument& e) {
        fail(source, line_no, e.what());
    }

    for (const auto& pt : obj["points"]) {
        if (!pt.is_array() || pt.size() != static_cast<std::size_t>(kNumFeatures))
            fail(source, line_no,
                 "point array must have exactly " + std::to_string(kNumFeatures) + " entries");
        Point p{};
        for (int f = 0; f < kNumFeatures; ++f) {
            const auto& v = pt[f];
            if (v.is_null())
                p[f] = std::nullopt;
            else if (v.is_number())
                p[f] = v.get<double>();
            else
                fail(source, line_no, "point values must be numbers or null");
        }
        cloud.points.push_back(p);
    }
    try {
        cloud.validate();
    } catch (const std::invalid_argument& e) {
        fail(source, line_no, e.what());
    }
    return cloud;
}

}  // namespace

Dataset read_jsonl(std::istream& in, std::string_view source_name) {
    Dataset out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        out.samples.push_back(parse_line(line, source_name, line_no));
    }
    return out;
}

Dataset read_jsonl_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path.string());
    return read_jsonl(in, path.string());
}

std::string to_jsonl_line(const PointCloud& cloud) {
    json pts = json::array();
    for (const Point& p : cloud.points) {
        json row = json::array();
        for (const auto& v : p) {
            if (v.has_value())
                row.push_back(*v);
            else
                row.push_back(nullptr);
        }
        pts.push_back(std::move(row));
    }
    json obj;
    obj["track_id"] = cloud.track_id;
    obj["label"] = std::string(to_string(cloud.label));
    obj["points"] = std::move(pts);
    return obj.dump();
}

void write_jsonl(const Dataset& dataset, std::ostream& out) {
    for (const PointCloud& c : dataset.samples) out << to_jsonl_line(c) << '\n';
}

void write_jsonl_file(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path.string());
    write_jsonl(dataset, out);
}

}  // namespace refhist
