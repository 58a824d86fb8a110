#include <doctest.h>

#include <algorithm>
#include <iterator>
#include <set>

#include "eyessl/errors.hpp"
#include "eyessl/evaluation.hpp"
#include "support.hpp"

using namespace eyessl;

namespace {

LabelMask binary_2x2(int bits) {
  LabelMask m = make_mask(2, 2, 2);
  for (int i = 0; i < 4; ++i) m.classes[i] = static_cast<std::uint8_t>((bits >> i) & 1);
  return m;
}

std::set<int> pixels_of(const LabelMask& m, int c) {
  std::set<int> s;
  for (std::size_t i = 0; i < m.classes.size(); ++i)
    if (m.classes[i] == c) s.insert(static_cast<int>(i));
  return s;
}

History make_history(Method method, int k, std::uint64_t seed, std::vector<double> mious) {
  History h;
  h.info = {method, k, SplitMode::kMultiSubject, seed};
  for (std::size_t e = 0; e < mious.size(); ++e) {
    EpochRecord r;
    r.epoch = static_cast<int>(e);
    r.l_sup = 1.0 / (e + 1);
    if (method != Method::kSL) r.l_u = 0.01 * e;
    if (method == Method::kSSL_SS) r.l_ss = 0.02 * e;
    r.lambda_u = 0.02 * e;
    r.lambda_ss = 0.002 * e;
    r.val_miou = mious[e];
    r.val_iou = {0.99, 0.9, mious[e], std::nullopt};
    h.epochs.push_back(r);
  }
  return h;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("IoU equals set arithmetic over all 2x2 binary pairs") {
  int pairs = 0;
  for (int a = 0; a < 16; ++a) {
    for (int b = 0; b < 16; ++b) {
      const LabelMask pred = binary_2x2(a), target = binary_2x2(b);
      const ClassIoU got = iou(pred, target);
      for (int c = 0; c < 2; ++c) {
        const auto P = pixels_of(pred, c), T = pixels_of(target, c);
        std::set<int> inter, uni;
        std::set_intersection(P.begin(), P.end(), T.begin(), T.end(), std::inserter(inter, inter.end()));
        std::set_union(P.begin(), P.end(), T.begin(), T.end(), std::inserter(uni, uni.end()));
        if (uni.empty()) {
          CHECK_FALSE(got[c].has_value());
        } else {
          REQUIRE(got[c].has_value());
          CHECK(*got[c] == double(inter.size()) / double(uni.size()));
        }
      }
      ++pairs;
    }
  }
  CHECK(pairs == 256);
}

TEST_CASE("four-class 16x16 masks match a pixel-count oracle") {
  RandomStream rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const LabelMask pred = testing::random_mask(16, 16, 4, rng);
    const LabelMask target = testing::random_mask(16, 16, 4, rng);
    const ClassIoU got = iou(pred, target);
    double sum = 0.0;
    for (int c = 0; c < 4; ++c) {
      int inter = 0, uni = 0;
      for (int i = 0; i < 256; ++i) {
        const bool p = pred.classes[i] == c, t = target.classes[i] == c;
        inter += p && t;
        uni += p || t;
      }
      REQUIRE(got[c].has_value());
      CHECK(std::abs(*got[c] - double(inter) / uni) < 1e-9);
      sum += double(inter) / uni;
    }
    CHECK(std::abs(mean_iou(got) - sum / 4) < 1e-9);
  }
}

TEST_CASE("undefined classes are skipped in the mean") {
  LabelMask a = make_mask(2, 2), b = make_mask(2, 2);
  a.classes[0] = 1;
  const ClassIoU per = iou(a, b);
  CHECK(per[0] == doctest::Approx(0.75));
  CHECK(per[1] == 0.0);
  CHECK_FALSE(per[2].has_value());
  CHECK_FALSE(per[3].has_value());
  CHECK(mean_iou(per) == doctest::Approx(0.375));
  CHECK(mean_iou(per, false) == 0.0);
  CHECK(mean_iou(iou(a, a)) == 1.0);
}

TEST_CASE("global and per-image aggregation") {
  LabelMask t1 = make_mask(2, 2, 2), p1 = make_mask(2, 2, 2);
  t1.classes[0] = 1;
  p1.classes[0] = 1;
  LabelMask t2 = make_mask(2, 2, 2), p2 = make_mask(2, 2, 2);
  t2.classes[0] = t2.classes[1] = t2.classes[2] = 1;
  p2.classes[0] = 1;
  const std::vector<LabelMask> preds{p1, p2}, targets{t1, t2};
  const IoUReport global = evaluate_predictions(preds, targets);
  CHECK(*global.per_class[1] == doctest::Approx(2.0 / 4.0));
  CHECK(*global.per_class[0] == doctest::Approx(4.0 / 6.0));
  CHECK(global.n_images == 2);
  const IoUReport per_image = evaluate_predictions(preds, targets, {IouAggregation::kPerImage, true});
  CHECK(*per_image.per_class[1] == doctest::Approx((1.0 + 1.0 / 3.0) / 2));
  CHECK(per_image.mean == doctest::Approx((1.0 + (1.0 / 3.0 + 1.0 / 3.0) / 2) / 2));
  CHECK_THROWS_AS(evaluate_predictions(std::vector<LabelMask>{}, std::vector<LabelMask>{}), ValidationError);
  CHECK_THROWS_AS(evaluate_predictions(preds, std::vector<LabelMask>{t1}), ShapeError);
  CHECK_THROWS_AS(iou(p1, make_mask(3, 2, 2)), ShapeError);
}

TEST_CASE("evaluate runs argmax of the model") {
  RandomStream rng(4);
  const Model model = init_params({2, 2, 4, 8, 8}, rng);
  std::vector<LabeledItem> data;
  std::vector<LabelMask> preds, targets;
  for (int i = 0; i < 3; ++i) {
    LabeledItem it{testing::random_image(8, 8, rng), testing::random_mask(8, 8, 4, rng)};
    preds.push_back(argmax(forward(model, it.image)));
    targets.push_back(it.mask);
    data.push_back(std::move(it));
  }
  CHECK(evaluate(model, data).mean == evaluate_predictions(preds, targets).mean);
}

TEST_CASE("history best index and JSONL round trip") {
  History h = make_history(Method::kSSL_SS, 4, 3, {0.5, 0.7, 0.7, 0.6});
  CHECK(h.best_index() == 1u);
  CHECK_FALSE(History{}.best_index().has_value());
  const std::string text = history_to_jsonl(h);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  CHECK(text.find("\"pupil\":null") != std::string::npos);
  CHECK(history_from_jsonl(text) == h);

  const auto dir = testing::scratch_dir("history");
  write_history(dir / "h.jsonl", h);
  CHECK(read_history(dir / "h.jsonl") == h);
  CHECK_THROWS_AS(read_history(dir / "missing.jsonl"), IoError);
  CHECK_THROWS_AS(history_from_jsonl("{not json}\n"), IoError);
  CHECK_THROWS_AS(history_from_jsonl(""), IoError);
}

TEST_CASE("report reproduces the published improvement cell") {
  const std::vector<History> hs{make_history(Method::kSL, 4, 0, {0.8828}),
                                make_history(Method::kSSL_D, 4, 0, {0.9242}),
                                make_history(Method::kSSL_SS, 4, 0, {0.9254})};
  const std::string table = render_report(hs, ReportFormat::kTable);
  CHECK(table.find("88.28") != std::string::npos);
  CHECK(table.find("92.54") != std::string::npos);
  CHECK(table.find("4.83") != std::string::npos);
  CHECK(table.find("4.69") != std::string::npos);
  const std::string csv = render_report(hs, ReportFormat::kCsv);
  CHECK(csv.find("SSL_SS,4,multi-subject,0,mean,92.54") != std::string::npos);
  const std::string plot = render_report(hs, ReportFormat::kPlotData);
  CHECK(plot.find("4,SSL_D,92.42") != std::string::npos);
  CHECK_THROWS_AS(render_report(std::vector<History>{}, ReportFormat::kTable), ValidationError);

  const auto dir = testing::scratch_dir("report");
  write_reports(hs, dir);
  CHECK(std::filesystem::exists(dir / "report.txt"));
  CHECK(std::filesystem::exists(dir / "report.csv"));
  CHECK(std::filesystem::exists(dir / "plot.csv"));
}

TEST_CASE("report averages seeds per cell") {
  const std::vector<History> hs{make_history(Method::kSL, 4, 0, {0.80}), make_history(Method::kSL, 4, 1, {0.90}),
                                make_history(Method::kSL, 200, 0, {0.95})};
  const std::string table = render_report(hs, ReportFormat::kTable);
  CHECK(table.find("85.00") != std::string::npos);
  CHECK(table.find("95.00") != std::string::npos);
}

TEST_CASE("overlay blends class colours") {
  EyeImage img = make_image(Tensor<float>(1, 8, 8, 0.5f), "o");
  LabelMask m = make_mask(8, 8);
  m.classes(0, 0, 0) = 3;
  const auto rgb = overlay_rgb(img, m);
  CHECK(rgb.channels() == 3);
  const Rgb pupil = class_color(3);
  CHECK(rgb(0, 0, 0) == std::lround(0.6 * 127.5 + 0.4 * pupil.r));
  CHECK(rgb(2, 0, 0) == std::lround(0.6 * 127.5 + 0.4 * pupil.b));
  const Rgb bg = class_color(0);
  CHECK(rgb(1, 3, 3) == std::lround(0.6 * 127.5 + 0.4 * bg.g));
  CHECK_THROWS_AS(overlay_rgb(img, make_mask(4, 8)), ShapeError);
  const auto dir = testing::scratch_dir("overlay");
  overlay_masks(img, m, dir / "o.png");
  CHECK(std::filesystem::exists(dir / "o.png"));
}

}  // TEST_SUITE
