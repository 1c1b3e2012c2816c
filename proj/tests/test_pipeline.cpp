#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <sys/wait.h>

#include "arfp/checkpoint.hpp"
#include "arfp/config.hpp"
#include "arfp/data.hpp"
#include "arfp/errors.hpp"
#include "arfp/image_io.hpp"
#include "arfp/report.hpp"
#include "support.hpp"

using namespace arfp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("arfp_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(ARFP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, DefaultsValidateAndRoundTrip) {
    const ExperimentConfig c = load_config("");
    EXPECT_EQ(c.arch.image_size, c.dataset.image_size);
    const ExperimentConfig d = ExperimentConfig::from_json(c.to_json());
    EXPECT_EQ(d.to_json(), c.to_json());
    EXPECT_EQ(d.hash(), c.hash());
    EXPECT_EQ(c.hash().size(), 16u);
}

TEST(Config, OverridesApplyAndChangeTheHash) {
    const ExperimentConfig a = load_config("", {"train.cycles=3", "dataset.image_size=32", "output_dir=somewhere"});
    EXPECT_EQ(a.train.cycles, 3);
    EXPECT_EQ(a.arch.image_size, 32);
    EXPECT_EQ(a.output_dir, "somewhere");
    EXPECT_NE(a.hash(), load_config("").hash());
}

TEST(Config, InvalidInputsRaiseConfigError) {
    EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
    EXPECT_THROW(load_config("", {"train.cycles=0"}), ConfigError);
    EXPECT_THROW(load_config("", {"no_equals_sign"}), ConfigError);
    EXPECT_THROW(load_config("", {"bogus.key=1"}), ConfigError);
    EXPECT_THROW(load_config("", {"eval.integrity_threshold=0.7"}), ConfigError);
    EXPECT_THROW(load_config("", {"attacker.family=\"blur-purifier\""}), ConfigError);
    const fs::path d = scratch("cfg");
    std::ofstream(d / "bad.json") << "{ not json";
    EXPECT_THROW(load_config((d / "bad.json").string()), ConfigError);
}

TEST(Report, CsvAndJsonCarryHeaderAndRows) {
    MetricsReport r("exp", "abc123", 32);
    r.add("raw", "nonce_ber", 0.125, "fraction", 7);
    r.add("raw", "psnr", std::numeric_limits<double>::infinity(), "dB", 7);
    EXPECT_DOUBLE_EQ(r.value("raw", "nonce_ber"), 0.125);
    EXPECT_TRUE(r.has("raw", "psnr"));
    EXPECT_FALSE(r.has("jpeg75", "psnr"));
    EXPECT_THROW(r.value("jpeg75", "psnr"), std::out_of_range);
    const std::string csv = r.to_csv();
    EXPECT_NE(csv.find("# config_hash: abc123"), std::string::npos);
    EXPECT_NE(csv.find("# image_size: 32"), std::string::npos);
    EXPECT_NE(csv.find("condition,metric,value,units,seed,config_hash\n"), std::string::npos);
    EXPECT_NE(csv.find("raw,nonce_ber,0.125,fraction,7,abc123"), std::string::npos);
    EXPECT_NE(csv.find("raw,psnr,inf,dB"), std::string::npos);
    const nlohmann::json j = r.to_json();
    EXPECT_EQ(j["rows"].size(), 2u);
    EXPECT_EQ(j["header"]["config_hash"], "abc123");
    const fs::path d = scratch("report");
    r.write(d.string(), "rep");
    EXPECT_TRUE(fs::exists(d / "rep.csv"));
    EXPECT_TRUE(fs::exists(d / "rep.json"));
}

TEST(Data, SyntheticFacesAreDeterministicAndInRange) {
    DatasetSpec s;
    s.image_size = 16;
    s.identities = 3;
    s.per_identity = 4;
    const Dataset a = load_dataset(s), b = load_dataset(s);
    EXPECT_EQ(a.size(), 12);
    EXPECT_EQ(a.hash(), b.hash());
    for (double v : a.images.vec()) {
        EXPECT_GE(v, -1.0);
        EXPECT_LE(v, 1.0);
    }
    s.seed = 1;
    EXPECT_NE(load_dataset(s).hash(), a.hash());
}

TEST(Data, SplitIsPerIdentityAndDisjoint) {
    DatasetSpec s;
    s.image_size = 16;
    s.identities = 4;
    s.per_identity = 5;
    const Dataset d = load_dataset(s);
    const auto [ref, probe] = split_reference_probe(d, 0.5, 3);
    EXPECT_EQ(ref.size() + probe.size(), 20);
    std::map<int, int> nref, nprobe;
    for (int l : ref.labels) ++nref[l];
    for (int l : probe.labels) ++nprobe[l];
    for (int id = 0; id < 4; ++id) {
        EXPECT_EQ(nref[id], 3);  // round(2.5) = 3
        EXPECT_EQ(nprobe[id], 2);
    }
    for (const auto& n : ref.names) EXPECT_EQ(std::count(probe.names.begin(), probe.names.end(), n), 0);
}

TEST(Data, ImageDirectoryLoadsSortedIdentities) {
    const fs::path d = scratch("imgdir");
    Rng rng(1);
    for (const std::string id : {"bob", "alice"}) {
        fs::create_directories(d / id);
        for (int i = 0; i < 2; ++i)
            write_png((d / id / ("img" + std::to_string(i) + ".png")).string(),
                      arfp::test::random_tensor({3, 20, 20}, rng));
    }
    DatasetSpec s;
    s.source = DataSource::ImageDirectory;
    s.directory = d.string();
    s.image_size = 16;
    const Dataset ds = load_dataset(s);
    EXPECT_EQ(ds.size(), 4);
    EXPECT_EQ(ds.images.shape(), (Shape{4, 3, 16, 16}));
    EXPECT_EQ(ds.labels, (std::vector<int>{0, 0, 1, 1}));
    s.directory = (d / "missing").string();
    EXPECT_THROW(load_dataset(s), IoError);
}

TEST(ImageIo, PngRoundTripIsExactOnQuantizedImages) {
    Rng rng(2);
    const Tensor x = quantize_u8(arfp::test::random_tensor({3, 16, 16}, rng));
    const fs::path d = scratch("png");
    write_png((d / "x.png").string(), x);
    const Tensor y = read_image((d / "x.png").string());
    ASSERT_TRUE(y.same_shape(x));
    EXPECT_LT(arfp::test::max_abs_diff(x, y), 1e-12);
    EXPECT_THROW(read_image((d / "missing.png").string()), IoError);
}

TEST(ImageIo, JpegIsLossyButClose) {
    Rng rng(3);
    Tensor x({3, 16, 16});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 16; ++y)
            for (int w = 0; w < 16; ++w) x[static_cast<std::size_t>(c * 256 + y * 16 + w)] = 0.05 * (y + w) - 0.7;
    const Tensor j = jpeg_roundtrip(x, 75);
    EXPECT_TRUE(j.same_shape(x));
    EXPECT_LT(arfp::test::max_abs_diff(j, x), 0.2);
    EXPECT_EQ(to_u8(-1.0), 0);
    EXPECT_EQ(to_u8(1.0), 255);
}

TEST(Checkpoint, RoundTripAndCorruptionDetection) {
    ParamSet ps;
    Rng rng(4);
    ps.add("w", arfp::test::random_tensor({2, 3}, rng));
    ps.add("b", arfp::test::random_tensor({3}, rng));
    const fs::path d = scratch("ckpt");
    const std::string path = (d / "m.ckpt").string();
    save_checkpoint(path, "unit", {{"k", 1}}, {{"g", &ps}});
    const Checkpoint c = read_checkpoint(path);
    EXPECT_EQ(c.kind, "unit");
    EXPECT_EQ(c.arch["k"], 1);
    ParamSet other;
    other.add("w", Tensor({2, 3}));
    other.add("b", Tensor({3}));
    restore_group(c, "g", other);
    EXPECT_EQ(other.hash(), ps.hash());
    ParamSet wrong;
    wrong.add("w", Tensor({3, 2}));
    wrong.add("b", Tensor({3}));
    EXPECT_THROW(restore_group(c, "g", wrong), std::exception);
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(40);
        f.put('\x7f');
    }
    EXPECT_THROW(read_checkpoint(path), IoError);
}

TEST(Cli, ExitCodes) {
    const fs::path d = scratch("cli");
    EXPECT_EQ(run_cli("--help"), 0);
    EXPECT_EQ(run_cli("frobnicate"), 1);
    EXPECT_EQ(run_cli(""), 1);
    EXPECT_EQ(run_cli("train --set train.cycles=0"), 1);
    EXPECT_EQ(run_cli("train --config " + (d / "absent.json").string()), 1);
    // No trained model in the output directory: a runtime failure.
    EXPECT_EQ(run_cli("evaluate --set output_dir=" + (d / "empty").string()), 2);
    EXPECT_EQ(run_cli("leakage-demo --set output_dir=" + d.string()), 0);
    std::ifstream in(d / "leakage_demo.csv");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string csv = ss.str();
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 12);
}
