#include "nighttrack/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace nighttrack {

namespace {

std::string frame_name(size_t idx) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06zu.ppm", idx);
    return buf;
}

std::string format_px(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

Box parse_groundtruth_line(const std::string& line, int lineno, const std::string& file) {
    double x, y, w, h;
    char extra;
    const int n = std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf %c", &x, &y, &w, &h, &extra);
    if (n != 4) {
        throw ParseError("malformed groundtruth line " + std::to_string(lineno) + " in " + file +
                         ": '" + line + "'");
    }
    if (w <= 0.0 || h <= 0.0) {
        throw ParseError("non-positive box size at line " + std::to_string(lineno) + " in " + file);
    }
    return Box::from_xywh(x, y, w, h, BoxFrame::pixel);
}

std::vector<Box> read_groundtruth(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("read_groundtruth: cannot open " + path);
    std::vector<Box> boxes;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        boxes.push_back(parse_groundtruth_line(line, lineno, path));
    }
    return boxes;
}

void write_groundtruth(const std::vector<Box>& boxes, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("write_groundtruth: cannot open " + path);
    for (const Box& b : boxes) {
        f << format_px(b.x1) << "," << format_px(b.y1) << "," << format_px(b.width()) << ","
          << format_px(b.height()) << "\n";
    }
}

void write_dataset(const std::vector<Sequence>& sequences, const std::string& dir) {
    fs::create_directories(dir);
    nlohmann::ordered_json manifest;
    manifest["sequence_count"] = sequences.size();
    manifest["sequences"] = nlohmann::ordered_json::array();
    for (const Sequence& seq : sequences) {
        if (seq.frames.size() != seq.groundtruth.size()) {
            throw DataError("write_dataset: frame/groundtruth count mismatch in " + seq.name);
        }
        const fs::path sdir = fs::path(dir) / seq.name;
        fs::create_directories(sdir / "frames");
        for (size_t i = 0; i < seq.frames.size(); ++i) {
            write_ppm(seq.frames[i], (sdir / "frames" / frame_name(i)).string());
        }
        write_groundtruth(seq.groundtruth, (sdir / "groundtruth.txt").string());
        std::ofstream attrs((sdir / "attributes.txt").string());
        for (const std::string& a : seq.attributes) attrs << a << "\n";

        nlohmann::ordered_json entry;
        entry["name"] = seq.name;
        entry["frame_count"] = seq.frames.size();
        entry["attributes"] = seq.attributes;
        manifest["sequences"].push_back(entry);
    }
    std::ofstream mf((fs::path(dir) / "manifest.json").string());
    mf << manifest.dump(2) << "\n";
}

std::vector<Sequence> read_dataset(const std::string& dir) {
    const fs::path root(dir);
    std::ifstream mf((root / "manifest.json").string());
    if (!mf) throw DataError("read_dataset: missing manifest.json in " + dir);
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("read_dataset: bad manifest.json: ") + e.what());
    }

    std::vector<Sequence> sequences;
    for (const auto& entry : manifest.at("sequences")) {
        Sequence seq;
        seq.name = entry.at("name").get<std::string>();
        const size_t frame_count = entry.at("frame_count").get<size_t>();
        const fs::path sdir = root / seq.name;
        for (size_t i = 0; i < frame_count; ++i) {
            seq.frames.push_back(read_ppm((sdir / "frames" / frame_name(i)).string()));
        }
        seq.groundtruth = read_groundtruth((sdir / "groundtruth.txt").string());
        if (seq.groundtruth.size() != frame_count) {
            throw DataError("read_dataset: groundtruth count mismatch in " + seq.name);
        }
        std::ifstream attrs((sdir / "attributes.txt").string());
        std::string line;
        while (std::getline(attrs, line)) {
            if (!line.empty()) seq.attributes.push_back(line);
        }
        sequences.push_back(std::move(seq));
    }
    return sequences;
}

}  // namespace nighttrack
