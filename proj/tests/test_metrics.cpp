#include <doctest.h>

#include "stvun/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace stvun;
using namespace stvun::eval;
using oracles::psnr_oracle;
using oracles::ssim_oracle;
namespace fs = std::filesystem;

namespace {

data::Dataset hr_testset(int clips, int frames, int size) {
  data::Dataset ds;
  for (int k = 0; k < clips; ++k) {
    ds.hr_clips.push_back(data::synthesize_clip(frames, size, size, 50 + k));
    ds.index.clips.push_back(data::ClipEntry{"t" + std::to_string(k), {}, {}, frames});
  }
  return ds;
}

// Returns the HR ground truth it is not supposed to see, by looking up the
// frame index behind the center slot.
WindowModel oracle_model(const data::Dataset& ds, int center, std::vector<std::int64_t>* seen) {
  return [&ds, center, seen](const WindowRequest& req) {
    if (seen) seen->insert(seen->end(), req.source_frames.begin(), req.source_frames.end());
    const auto& frames = ds.hr_clips[req.clip].frames;
    const auto src = req.source_frames[center];
    WindowPrediction p;
    p.center = frames[src].pixels;
    for (std::size_t k = 0; k < req.t_ins.size(); ++k) p.intermediates.push_back(frames[src + 1].pixels);
    return p;
  };
}

}  // namespace

TEST_SUITE("metrics_eval") {
  TEST_CASE("PSNR of a uniform 0.1 error is 20 dB") {
    auto a = torch::zeros({3, 16, 16});
    auto b = torch::full({3, 16, 16}, 0.1);
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-6));
    CHECK(std::isinf(psnr(a, a)));
    CHECK(psnr(a, a) > 0);
  }

  TEST_CASE("PSNR matches a direct sum and is symmetric") {
    torch::manual_seed(11);
    for (int k = 0; k < 5; ++k) {
      auto a = torch::rand({3, 13, 17}), b = torch::rand({3, 13, 17});
      CHECK(std::abs(psnr(a, b) - psnr_oracle(a, b)) < 1e-9);
      CHECK(psnr(a, b) == psnr(b, a));
    }
    CHECK_THROWS_AS(psnr(torch::rand({3, 4, 4}), torch::rand({3, 4, 5})), ShapeError);
  }

  TEST_CASE("SSIM matches brute force on 16x16") {
    torch::manual_seed(12);
    for (int k = 0; k < 3; ++k) {
      auto a = torch::rand({3, 16, 16});
      auto b = (a + 0.2 * torch::randn({3, 16, 16})).clamp(0, 1);
      CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b)) < 1e-6);
    }
  }

  TEST_CASE("SSIM properties") {
    torch::manual_seed(13);
    auto a = torch::rand({3, 24, 24}), b = torch::rand({3, 24, 24});
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
    auto perm = torch::tensor({2, 0, 1});
    CHECK(ssim(a.index_select(0, perm), b.index_select(0, perm)) == doctest::Approx(ssim(a, b)).epsilon(1e-12));
    CHECK(ssim(a, (a + 0.2).clamp(0, 1)) < 1.0);
    auto checker = (torch::arange(24).view({24, 1}) + torch::arange(24).view({1, 24})).remainder(2).to(torch::kFloat32);
    auto bin = checker.expand({3, 24, 24}).contiguous();
    CHECK(ssim(bin, 1 - bin) < 0.0);
    CHECK_THROWS_AS(ssim(torch::rand({3, 10, 10}), torch::rand({3, 10, 10})), ShapeError);
  }

  TEST_CASE("luma and crop options") {
    torch::manual_seed(14);
    auto a = torch::rand({3, 20, 20}), b = torch::rand({3, 20, 20});
    MetricOptions luma;
    luma.luma = true;
    auto ya = 0.299 * a[0] + 0.587 * a[1] + 0.114 * a[2];
    auto yb = 0.299 * b[0] + 0.587 * b[1] + 0.114 * b[2];
    CHECK(std::abs(psnr(a, b, luma) - psnr_oracle(ya.unsqueeze(0), yb.unsqueeze(0))) < 1e-6);
    MetricOptions crop;
    crop.crop = 4;
    auto inner = [](const torch::Tensor& t) { return t.slice(1, 4, 16).slice(2, 4, 16); };
    CHECK(std::abs(psnr(a, b, crop) - psnr_oracle(inner(a), inner(b))) < 1e-9);
  }

  TEST_CASE("a perfect model scores inf dB and SSIM 1 while seeing only even frames") {
    auto ds = hr_testset(2, 9, 48);
    const auto cfg = validate_config(ModelConfig{});
    std::vector<std::int64_t> seen;
    const auto report = evaluate_protocol(oracle_model(ds, cfg->center_index(), &seen), ds, cfg);
    CHECK(std::isinf(report.center.psnr));
    CHECK(std::isinf(report.intermediate.psnr));
    CHECK(report.center.ssim == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(report.intermediate.ssim == doctest::Approx(1.0).epsilon(1e-12));
    // 9 frames: 5 even centers and 4 odd intermediates per clip.
    CHECK(report.center.count == 10);
    CHECK(report.intermediate.count == 8);
    CHECK(report.lr_height == 12);
    REQUIRE_FALSE(seen.empty());
    for (auto s : seen) CHECK(s % 2 == 0);
    for (const auto& f : report.frames) {
      CHECK((f.kind == OutputKind::Center) == (f.frame % 2 == 0));
    }

    const auto dir = fs::temp_directory_path() / "stvun_test_metrics";
    fs::create_directories(dir);
    write_frame_csv(report, dir / "frames.csv");
    std::ifstream in(dir / "frames.csv");
    std::string header, row;
    std::getline(in, header);
    CHECK(header == "clip,frame,kind,psnr,ssim");
    std::getline(in, row);
    CHECK(row.find(",inf,") != std::string::npos);
  }

  TEST_CASE("even-length clips drop the trailing gap") {
    auto ds = hr_testset(1, 8, 32);
    const auto cfg = validate_config(ModelConfig{});
    const auto report = evaluate_protocol(oracle_model(ds, cfg->center_index(), nullptr), ds, cfg);
    CHECK(report.center.count == 4);
    CHECK(report.intermediate.count == 3);
  }

  TEST_CASE("aggregates are the means of the per-frame CSV") {
    auto ds = hr_testset(2, 7, 32);
    const auto cfg = validate_config(ModelConfig{});
    const auto report = evaluate_protocol(bilinear_baseline(4), ds, cfg);
    const auto dir = fs::temp_directory_path() / "stvun_test_metrics";
    fs::create_directories(dir);
    write_frame_csv(report, dir / "bilinear.csv");
    std::ifstream in(dir / "bilinear.csv");
    std::string line;
    std::getline(in, line);
    std::map<std::string, std::pair<double, int>> psnr_sum, ssim_sum;
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      REQUIRE(cells.size() == 5);
      for (const auto& key : {cells[2], std::string("all"), cells[0] + "/" + cells[2]}) {
        psnr_sum[key].first += std::stod(cells[3]);
        psnr_sum[key].second += 1;
        ssim_sum[key].first += std::stod(cells[4]);
        ssim_sum[key].second += 1;
      }
    }
    auto mean = [](const std::pair<double, int>& p) { return p.first / p.second; };
    // The CSV rounds to 6 decimals.
    CHECK(std::abs(report.center.psnr - mean(psnr_sum["center"])) < 1e-6);
    CHECK(std::abs(report.intermediate.psnr - mean(psnr_sum["intermediate"])) < 1e-6);
    CHECK(std::abs(report.overall.psnr - mean(psnr_sum["all"])) < 1e-6);
    CHECK(std::abs(report.overall.ssim - mean(ssim_sum["all"])) < 1e-6);
    CHECK(std::abs(report.clips[1].center.psnr - mean(psnr_sum["t1/center"])) < 1e-6);
    CHECK(report.overall.count == report.center.count + report.intermediate.count);
    CHECK(std::isfinite(report.center.psnr));
    CHECK(report.center.psnr > 15.0);
  }

  TEST_CASE("baseline predictions are bilinear and blended bilinear") {
    torch::manual_seed(15);
    WindowRequest req;
    req.lr = torch::rand({7, 3, 5, 6});
    req.t_ins = {TimeIndex(1, 2)};
    const auto pred = bilinear_baseline(4)(req);
    auto u = [](const torch::Tensor& x) { return bilinear_upsample(x.unsqueeze(0), 4).squeeze(0); };
    CHECK(torch::equal(pred.center, u(req.lr[3])));
    CHECK(support::max_abs_diff(pred.intermediates[0], u((req.lr[3] + req.lr[4]) / 2)) < 1e-7);
  }

  TEST_CASE("only T_in = 1/2 has ground truth under the protocol") {
    auto ds = hr_testset(1, 7, 32);
    const auto cfg = validate_config(ModelConfig{});
    CHECK_THROWS_AS(evaluate_protocol(bilinear_baseline(4), ds, cfg, {TimeIndex(1, 4)}), DomainError);
    CHECK_THROWS_AS(evaluate_protocol(bilinear_baseline(4), ds, cfg, uniform_t_ins(3)), DomainError);
    auto tiny = hr_testset(1, 2, 32);
    CHECK_THROWS_AS(evaluate_protocol(bilinear_baseline(4), tiny, cfg), DataError);
  }

  TEST_CASE("network model wraps the net and the table renders") {
    ModelConfig c;
    c.base_channels = 8;
    c.growth = 4;
    c.num_blocks = 1;
    c.encoder_layers = 1;
    c.decoder_layers = 1;
    const auto cfg = validate_config(c);
    Rng rng(1);
    auto net = make_network(cfg, rng);
    auto ds = hr_testset(1, 5, 48);
    auto report = evaluate_protocol(network_model(net), ds, cfg);
    report.params = net->count_parameters().total();
    CHECK(report.runtime_per_frame > 0.0);
    auto base = evaluate_protocol(bilinear_baseline(4), ds, cfg);
    base.label = "Bilinear";
    const auto table = render_table({report, base});
    CHECK(table.find("Center PSNR/SSIM") != std::string::npos);
    CHECK(table.find("Bilinear") != std::string::npos);
    CHECK(table.find("12x12") != std::string::npos);
    CHECK(format_metric(std::numeric_limits<double>::infinity(), 2) == "inf");
    CHECK(format_metric(1.23456, 2) == "1.23");
  }
}
