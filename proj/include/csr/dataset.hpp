#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>

#include "csr/hash.hpp"
#include "csr/rng.hpp"
#include "csr/tensor.hpp"

namespace csr {

// "shapes-kit": procedurally drawn grayscale shapes replicated to 3 channels.
// Six classes with randomized position, scale, rotation and intensities plus
// mild per-pixel uniform noise; fully determined by the seed.

inline const std::vector<std::string>& shape_class_names() {
    static const std::vector<std::string> names = {"disk",  "square", "triangle",
                                                   "cross", "ring",   "stripes"};
    return names;
}

struct DatasetConfig {
    uint64_t seed = 7;
    int classes = 6;
    int train_per_class = 100;
    int test_per_class = 50;
    int size = 64;
    double noise = 0.05;
};

struct Dataset {
    std::vector<Tensor> images;  // each (size, size, 3), values in [0,1]
    std::vector<int> labels;
    int classes = 0;
    int size = 0;
};

namespace detail {

inline bool shape_member(int cls, double x, double y) {
    switch (cls) {
        case 0:  // disk
            return x * x + y * y <= 1.0;
        case 1:  // square
            return std::abs(x) <= 0.82 && std::abs(y) <= 0.82;
        case 2: {  // equilateral triangle, apex up
            if (y < -0.6 || y > 1.0) return false;
            double half = (1.0 - y) * 0.55;
            return std::abs(x) <= half;
        }
        case 3:  // cross
            return (std::abs(x) <= 0.32 && std::abs(y) <= 1.0) ||
                   (std::abs(y) <= 0.32 && std::abs(x) <= 1.0);
        case 4: {  // ring
            double r2 = x * x + y * y;
            return r2 <= 1.0 && r2 >= 0.55 * 0.55;
        }
        case 5: {  // stripes: three vertical bars
            if (std::abs(x) > 1.0 || std::abs(y) > 1.0) return false;
            int bar = static_cast<int>(std::floor((x + 1.0) * 2.5));
            return (bar % 2) == 0;
        }
        default:
            throw std::invalid_argument("shape_member: unknown class " + std::to_string(cls));
    }
}

}  // namespace detail

inline Tensor render_shape(int cls, int size, Rng& rng, double noise_amp) {
    double cx = 0.5 + rng.uniform(-0.12, 0.12);
    double cy = 0.5 + rng.uniform(-0.12, 0.12);
    double scale = rng.uniform(0.22, 0.38);  // shape radius as a fraction of the image
    double theta = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    double fg = rng.uniform(0.65, 1.0);
    double bg = rng.uniform(0.0, 0.30);
    double ct = std::cos(theta), st = std::sin(theta);

    Tensor img({size, size, 3});
    for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
            // 2x2 supersampling for soft edges
            double cover = 0.0;
            for (int si = 0; si < 2; ++si)
                for (int sj = 0; sj < 2; ++sj) {
                    double py = (i + 0.25 + 0.5 * si) / size - cy;
                    double px = (j + 0.25 + 0.5 * sj) / size - cx;
                    double rx = (ct * px + st * py) / scale;
                    double ry = (-st * px + ct * py) / scale;
                    if (detail::shape_member(cls, rx, ry)) cover += 0.25;
                }
            double val = bg + (fg - bg) * cover + rng.uniform(-noise_amp, noise_amp);
            val = std::min(1.0, std::max(0.0, val));
            auto v = static_cast<float>(val);
            size_t base = (static_cast<size_t>(i) * size + j) * 3;
            img.data[base] = img.data[base + 1] = img.data[base + 2] = v;
        }
    }
    return img;
}

inline Dataset generate_dataset(const DatasetConfig& cfg, bool train_split) {
    if (cfg.classes < 2 || cfg.classes > static_cast<int>(shape_class_names().size()))
        throw std::invalid_argument("generate_dataset: class count out of range");
    Dataset ds;
    ds.classes = cfg.classes;
    ds.size = cfg.size;
    int per_class = train_split ? cfg.train_per_class : cfg.test_per_class;
    // split gets its own stream so train and test never share draws
    Rng rng(cfg.seed * 2 + (train_split ? 0 : 1));
    for (int n = 0; n < per_class; ++n)
        for (int c = 0; c < cfg.classes; ++c) {
            ds.images.push_back(render_shape(c, cfg.size, rng, cfg.noise));
            ds.labels.push_back(c);
        }
    return ds;
}

// ---- PPM (P6) and labels CSV ----------------------------------------------

inline void write_ppm(const std::string& path, const Tensor& image) {
    if (image.rank() != 3 || image.shape[2] != 3)
        throw std::invalid_argument("write_ppm: expected H x W x 3 image");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_ppm: cannot open " + path);
    f << "P6\n" << image.shape[1] << ' ' << image.shape[0] << "\n255\n";
    std::vector<unsigned char> bytes(image.data.size());
    for (size_t i = 0; i < image.data.size(); ++i) {
        double v = std::min(1.0f, std::max(0.0f, image.data[i])) * 255.0;
        bytes[i] = static_cast<unsigned char>(std::lround(v));
    }
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline Tensor read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_ppm: cannot open " + path);
    std::string magic;
    int w = 0, h = 0, maxv = 0;
    f >> magic >> w >> h >> maxv;
    if (magic != "P6" || maxv != 255 || w <= 0 || h <= 0)
        throw std::runtime_error("read_ppm: unsupported PPM header in " + path);
    f.get();  // single whitespace after maxval
    std::vector<unsigned char> bytes(static_cast<size_t>(w) * h * 3);
    f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("read_ppm: truncated file " + path);
    Tensor img({h, w, 3});
    for (size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.0f;
    return img;
}

inline void write_dataset(const Dataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream labels(dir + "/labels.csv");
    if (!labels) throw std::runtime_error("write_dataset: cannot open labels file in " + dir);
    labels << "filename,label\n";
    for (size_t i = 0; i < ds.images.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "img_%05zu.ppm", i);
        write_ppm(dir + "/" + name, ds.images[i]);
        labels << name << ',' << ds.labels[i] << '\n';
    }
}

inline Dataset load_dataset(const std::string& dir) {
    std::ifstream labels(dir + "/labels.csv");
    if (!labels) throw std::runtime_error("load_dataset: missing labels.csv in " + dir);
    std::string line;
    std::getline(labels, line);  // header
    Dataset ds;
    int max_label = -1;
    while (std::getline(labels, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("load_dataset: malformed labels row: " + line);
        std::string name = line.substr(0, comma);
        int label = std::stoi(line.substr(comma + 1));
        ds.images.push_back(read_ppm(dir + "/" + name));
        ds.labels.push_back(label);
        max_label = std::max(max_label, label);
    }
    if (ds.images.empty()) throw std::runtime_error("load_dataset: empty dataset in " + dir);
    ds.classes = max_label + 1;
    ds.size = ds.images[0].shape[0];
    return ds;
}

inline uint64_t dataset_fingerprint(const Dataset& ds) {
    uint64_t h = fnv1a(&ds.classes, sizeof(ds.classes));
    for (size_t i = 0; i < ds.images.size(); ++i) {
        h = fnv1a(ds.images[i].data.data(), ds.images[i].data.size() * sizeof(float), h);
        h = fnv1a(&ds.labels[i], sizeof(int), h);
    }
    return h;
}

}  // namespace csr
