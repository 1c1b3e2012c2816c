#include "arfp/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <stdexcept>

#include "arfp/errors.hpp"
#include "arfp/image_io.hpp"
#include "arfp/rng.hpp"

namespace arfp {

namespace fs = std::filesystem;

void DatasetSpec::validate() const {
    if (image_size < 16 || image_size % 8 != 0)
        throw std::invalid_argument("dataset image_size must be a multiple of 8 and at least 16");
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw std::invalid_argument("split fraction must lie in (0, 1)");
    if (source == DataSource::SyntheticFaces) {
        if (identities < 2) throw std::invalid_argument("dataset needs at least 2 identities");
        if (per_identity < 1) throw std::invalid_argument("images per identity must be positive");
        if (!(texture_amplitude >= 0.0)) throw std::invalid_argument("texture amplitude must be >= 0");
    } else if (directory.empty()) {
        throw std::invalid_argument("image-directory source needs a directory");
    }
}

nlohmann::json DatasetSpec::to_json() const {
    return {{"source", source == DataSource::SyntheticFaces ? "synthetic-faces" : "image-directory"},
            {"directory", directory},
            {"image_size", image_size},
            {"identities", identities},
            {"per_identity", per_identity},
            {"split_fraction", split_fraction},
            {"seed", seed},
            {"texture_amplitude", texture_amplitude}};
}

DatasetSpec DatasetSpec::from_json(const nlohmann::json& j) {
    DatasetSpec s;
    const std::string src = j.value("source", std::string("synthetic-faces"));
    if (src == "synthetic-faces")
        s.source = DataSource::SyntheticFaces;
    else if (src == "image-directory")
        s.source = DataSource::ImageDirectory;
    else
        throw std::invalid_argument("unknown dataset source '" + src + "'");
    s.directory = j.value("directory", s.directory);
    s.image_size = j.value("image_size", s.image_size);
    s.identities = j.value("identities", s.identities);
    s.per_identity = j.value("per_identity", s.per_identity);
    s.split_fraction = j.value("split_fraction", s.split_fraction);
    s.seed = j.value("seed", s.seed);
    s.texture_amplitude = j.value("texture_amplitude", s.texture_amplitude);
    s.validate();
    return s;
}

namespace {

// Periodic Gaussian smoothing of white noise, rescaled to unit std.
std::vector<double> smooth_noise(Rng& rng, int n, double sigma) {
    std::vector<double> a(static_cast<std::size_t>(n * n)), t(a.size());
    for (double& v : a) v = rng.normal();
    const int r = static_cast<int>(std::ceil(4.0 * sigma));
    std::vector<double> g(static_cast<std::size_t>(2 * r + 1));
    double gs = 0.0;
    for (int i = -r; i <= r; ++i) gs += g[static_cast<std::size_t>(i + r)] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    for (double& v : g) v /= gs;
    auto wrap = [n](int i) { return ((i % n) + n) % n; };
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            double s = 0.0;
            for (int k = -r; k <= r; ++k) s += g[static_cast<std::size_t>(k + r)] * a[static_cast<std::size_t>(y * n + wrap(x + k))];
            t[static_cast<std::size_t>(y * n + x)] = s;
        }
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            double s = 0.0;
            for (int k = -r; k <= r; ++k) s += g[static_cast<std::size_t>(k + r)] * t[static_cast<std::size_t>(wrap(y + k) * n + x)];
            a[static_cast<std::size_t>(y * n + x)] = s;
        }
    double mean = 0.0, var = 0.0;
    for (double v : a) mean += v;
    mean /= static_cast<double>(a.size());
    for (double v : a) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(a.size()));
    for (double& v : a) v /= sd;
    return a;
}

Tensor face_template(int S) {
    Tensor t({3, S, S});
    const double tone[3][2] = {{1.0, -0.2}, {0.7, -0.3}, {0.5, -0.4}};
    for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
            const double yy = y / (S - 1.0) * 2 - 1, xx = x / (S - 1.0) * 2 - 1;
            const double face = 0.5 * std::exp(-(xx * xx / 0.5 + yy * yy / 0.8));
            double dark = 0.0;
            for (double ex : {-0.35, 0.35}) dark += 0.5 * std::exp(-((xx - ex) * (xx - ex) + (yy + 0.2) * (yy + 0.2)) / 0.02);
            dark += 0.4 * std::exp(-(xx * xx / 0.08 + (yy - 0.45) * (yy - 0.45) / 0.01));
            for (int c = 0; c < 3; ++c) t[static_cast<std::size_t>((c * S + y) * S + x)] = face * tone[c][0] + tone[c][1] - dark;
        }
    return t;
}

Dataset synthetic_faces(const DatasetSpec& spec) {
    const int S = spec.image_size;
    const double scale = S / 32.0;
    const int shift = std::max(1, static_cast<int>(std::lround(scale)));
    const int pad = 2 * shift, n = S + 2 * pad;
    const Tensor tmpl = face_template(S);
    Rng rng(spec.seed, 41);
    Dataset d;
    d.images = Tensor({spec.identities * spec.per_identity, 3, S, S});
    std::size_t off = 0;
    for (int id = 0; id < spec.identities; ++id) {
        std::vector<std::vector<double>> base;
        for (int c = 0; c < 3; ++c) base.push_back(smooth_noise(rng, n, 1.5 * scale));
        double mix[3][3];
        for (auto& row : mix)
            for (double& v : row) v = rng.normal() / std::sqrt(3.0);
        std::vector<std::vector<double>> tex(3, std::vector<double>(static_cast<std::size_t>(n * n), 0.0));
        for (int c = 0; c < 3; ++c)
            for (int k = 0; k < 3; ++k)
                for (std::size_t i = 0; i < tex[0].size(); ++i) tex[static_cast<std::size_t>(c)][i] += mix[c][k] * base[static_cast<std::size_t>(k)][i];
        for (int j = 0; j < spec.per_identity; ++j) {
            const int dx = rng.uniform_int(-shift, shift), dy = rng.uniform_int(-shift, shift);
            const double gain = 1.0 + 0.05 * rng.normal();
            double bias[3];
            for (double& b : bias) b = 0.05 * rng.normal();
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < S; ++y)
                    for (int x = 0; x < S; ++x) {
                        const double tv = tex[static_cast<std::size_t>(c)][static_cast<std::size_t>((pad + dy + y) * n + pad + dx + x)];
                        double v = tmpl[static_cast<std::size_t>((c * S + y) * S + x)] + spec.texture_amplitude * tv;
                        v = v * gain + bias[c] + 0.03 * rng.normal();
                        d.images[off++] = std::clamp(v, -1.0, 1.0);
                    }
            d.labels.push_back(id);
            d.names.push_back("synthetic/" + std::to_string(id) + "/" + std::to_string(j));
        }
    }
    return d;
}

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".ppm" || ext == ".tif" ||
           ext == ".tiff";
}

Dataset image_directory(const DatasetSpec& spec) {
    const fs::path root(spec.directory);
    if (!fs::is_directory(root)) throw IoError("dataset directory not found", spec.directory);
    std::vector<fs::path> ids;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) ids.push_back(e.path());
    std::sort(ids.begin(), ids.end());
    Dataset d;
    std::vector<Tensor> imgs;
    for (std::size_t label = 0; label < ids.size(); ++label) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(ids[label]))
            if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const fs::path& f : files) {
            imgs.push_back(read_image(f.string(), spec.image_size));
            d.labels.push_back(static_cast<int>(label));
            d.names.push_back(f.string());
        }
    }
    if (imgs.empty()) throw IoError("no images found in dataset directory", spec.directory);
    d.images = Tensor::stack(imgs);
    return d;
}

}  // namespace

Dataset load_dataset(const DatasetSpec& spec) {
    spec.validate();
    return spec.source == DataSource::SyntheticFaces ? synthetic_faces(spec) : image_directory(spec);
}

std::pair<Dataset, Dataset> split_reference_probe(const Dataset& data, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("split fraction must lie in (0, 1)");
    std::map<int, std::vector<int>> by_id;
    for (int i = 0; i < data.size(); ++i) by_id[data.labels[static_cast<std::size_t>(i)]].push_back(i);
    std::vector<int> ref, probe;
    for (auto& [label, idx] : by_id) {
        const int n = static_cast<int>(idx.size());
        if (n < 2) throw std::invalid_argument("identity " + std::to_string(label) + " has fewer than 2 images");
        Rng rng(seed, 51 + static_cast<std::uint64_t>(label));
        const std::vector<int> perm = rng.permutation(n);
        const int k = std::clamp(static_cast<int>(std::lround(fraction * n)), 1, n - 1);
        for (int i = 0; i < n; ++i) (i < k ? ref : probe).push_back(idx[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
    }
    std::sort(ref.begin(), ref.end());
    std::sort(probe.begin(), probe.end());
    return {data.subset(ref), data.subset(probe)};
}

}  // namespace arfp
