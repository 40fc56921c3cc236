#include "lpr/selftest.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>

#include "lpr/ctc.hpp"
#include "lpr/fixtures.hpp"
#include "lpr/fusion.hpp"
#include "lpr/losses.hpp"
#include "lpr/pipeline.hpp"
#include "lpr/rectifier.hpp"

namespace lpr::selftest {
namespace {

class Log {
public:
  void line(const char* fmt, ...) __attribute__((format(printf, 2, 3))) {
    char buf[1024];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, args);
    va_end(args);
    text_ += buf;
    text_ += '\n';
  }
  std::string& text() { return text_; }

private:
  std::string text_;
};

// FNV-1a over the raw float bytes: any bit difference shows up in the log.
std::uint64_t fingerprint(const Tensor& t) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* p = reinterpret_cast<const unsigned char*>(t.storage().data());
  for (std::size_t i = 0; i < t.size() * sizeof(float); ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::string box_str(const Box& b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "[%.4f %.4f %.4f %.4f]", b.x1, b.y1, b.x2, b.y2);
  return buf;
}

double max_corner_error(const Quad& a, const Quad& b) {
  double e = 0.0;
  for (std::size_t k = 0; k < kCorners; ++k) e = std::max({e, std::abs(a[k].x - b[k].x), std::abs(a[k].y - b[k].y)});
  return e;
}

double max_box_error(const Box& a, const Box& b) {
  return std::max({std::abs(a.x1 - b.x1), std::abs(a.y1 - b.y1), std::abs(a.x2 - b.x2), std::abs(a.y2 - b.y2)});
}

}  // namespace

bool Report::passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.second; });
}

Report run(const Options& options) {
  namespace fs = std::filesystem;
  Report report;
  Log log;
  auto check = [&](const std::string& name, bool ok) {
    report.checks.emplace_back(name, ok);
    log.line("[check] %-28s %s", name.c_str(), ok ? "PASS" : "FAIL");
  };
  fs::create_directories(options.out_dir);
  auto save = [&](const std::string& name, const PtarArchive& archive) {
    ptar_write(options.out_dir / name, archive);
    report.artifacts.emplace_back(name);
  };
  auto save_json = [&](const std::string& name, const json& doc) {
    write_json(options.out_dir / name, doc);
    report.artifacts.emplace_back(name);
  };

  log.line("lpr selftest seed=%" PRIu64, options.seed);

  // Fixtures: one scene per difficulty.
  std::vector<fixtures::FixtureScene> scenes;
  {
    const fixtures::Difficulty kinds[] = {fixtures::Difficulty::axis_aligned, fixtures::Difficulty::rotated,
                                          fixtures::Difficulty::tilted};
    for (std::size_t i = 0; i < 3; ++i) {
      auto one = fixtures::gen_fixtures(1, options.seed + i, kinds[i]);
      one.front().id = std::string(fixtures::difficulty_name(kinds[i]));
      scenes.push_back(std::move(one.front()));
    }
  }
  fixtures::write_fixtures(options.out_dir / "fixtures", scenes);
  report.artifacts.emplace_back("fixtures/annotations.json");
  report.artifacts.emplace_back("fixtures/images.ptar");
  const auto annotations = fixtures::to_annotations(scenes);
  for (const auto& s : scenes) {
    const auto& p = s.annotations.front();
    log.line("[fixtures] %-12s text=%s box=%s image=%016" PRIx64, s.id.c_str(), p.text.c_str(),
             box_str(p.box).c_str(), fingerprint(s.image));
  }

  // Targets, then decode them as if they were network output.
  std::vector<heatmap::DetectionTargets> targets;
  for (const auto& a : annotations) targets.push_back(heatmap::encode_targets(a.plates, a.width, a.height));
  save("targets.ptar", pipeline::targets_to_archive(targets));

  std::vector<ImageDetections> detections;
  double box_err = 0.0, corner_err = 0.0;
  bool one_each = true;
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    heatmap::DecodeOptions opt;
    opt.image_width = static_cast<double>(annotations[i].width);
    opt.image_height = static_cast<double>(annotations[i].height);
    auto dets = heatmap::decode(targets[i].maps, opt);
    one_each = one_each && dets.size() == 1;
    if (!dets.empty()) {
      box_err = std::max(box_err, max_box_error(dets.front().box, annotations[i].plates.front().box));
      corner_err = std::max(corner_err, max_corner_error(dets.front().corners, annotations[i].plates.front().corners));
      log.line("[decode] %-12s score=%.6f box=%s", annotations[i].id.c_str(), dets.front().score,
               box_str(dets.front().box).c_str());
    }
    detections.push_back({annotations[i].id, annotations[i].width, annotations[i].height, std::move(dets)});
  }
  log.line("[decode] max box error=%.3g px, max corner error=%.3g px", box_err, corner_err);
  check("decode one plate per image", one_each);
  check("decode round trip < 1e-4 px", box_err < 1e-4 && corner_err < 1e-4);

  metrics::EvalConfig strict{0.7, false, false};
  const auto joined = pipeline::join_for_eval(detections, annotations);
  const auto det_metrics = metrics::eval_detection(joined, strict);
  log.line("[eval] detection precision=%.6f (%zu/%zu) at iou>0.7", det_metrics.precision, det_metrics.correct,
           det_metrics.predictions);
  check("detection precision 1.0", det_metrics.precision_defined && det_metrics.precision == 1.0);

  // Shared features from the stand-in backbone and random fusion weights.
  Tensor images = Tensor::nchw(scenes.size(), 1, scenes.front().image.height(), scenes.front().image.width());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    std::copy(scenes[i].image.storage().begin(), scenes[i].image.storage().end(),
              images.storage().begin() + i * scenes[i].image.size());
  }
  const fusion::StandInBackbone backbone(options.seed ^ 0xb5ULL);
  const auto stages = backbone.forward(images);
  const auto fusion_weights = fusion::FusionWeights::random(options.seed ^ 0xf5ULL, backbone.widths());
  const auto features = fusion::run_fusion(stages, fusion_weights);
  log.line("[fusion] shared=%s fingerprint=%016" PRIx64, features.shared.shape_string().c_str(),
           fingerprint(features.shared));
  check("shared map is B x 128 x H/4 x W/4",
        features.shared.dims() == std::vector<std::size_t>{scenes.size(), 128, images.height() / 4,
                                                            images.width() / 4});
  {
    PtarArchive a;
    a.add("shared", features.shared);
    save("features.ptar", a);
  }

  // Rectified plate crops.
  std::vector<std::vector<Detection>> per_image;
  for (const auto& d : detections) per_image.push_back(d.detections);
  const auto batch = rectify::rectify_plates(features.shared, per_image);
  log.line("[rectify] crops=%s fingerprint=%016" PRIx64, batch.crops.shape_string().c_str(),
           fingerprint(batch.crops));
  check("every plate rectified",
        std::all_of(batch.rectified.begin(), batch.rectified.end(), [](bool r) { return r; }));
  {
    PtarArchive a;
    a.add("crops", batch.crops);
    save("crops.ptar", a);
  }

  // Head contract on the real crops with random weights.
  const auto alphabet = recog::Alphabet::alphanumeric();
  const auto head_weights = recog::HeadWeights::random(options.seed ^ 0x4eULL, alphabet.classes());
  const auto head = recog::head_forward(batch.crops, head_weights);
  double fiber_err = 0.0;
  for (std::size_t t = 0; t < head.steps(); ++t) {
    for (std::size_t b = 0; b < head.batch(); ++b) {
      double s = 0.0;
      for (std::size_t k = 0; k < head.classes(); ++k) {
        s += head.values.storage()[(t * head.batch() + b) * head.classes() + k];
      }
      fiber_err = std::max(fiber_err, std::abs(s - 1.0));
    }
  }
  log.line("[head] output=%s max|sum-1|=%.3g fingerprint=%016" PRIx64, head.values.shape_string().c_str(),
           fiber_err, fingerprint(head.values));
  check("head output 24 x B_r x K",
        head.values.dims() == std::vector<std::size_t>{recog::kTimeSteps, batch.crops.batch(), alphabet.classes()});
  check("head fibers sum to 1", fiber_err < 1e-5);

  // Oracle logits from the matched ground-truth strings.
  std::vector<recog::Labels> labels;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    for (const auto& det : detections[i].detections) {
      const PlateAnnotation* best = nullptr;
      double best_iou = 0.0;
      for (const auto& p : annotations[i].plates) {
        const double v = metrics::iou(det.box, p.box);
        if (v > best_iou) best_iou = v, best = &p;
      }
      labels.push_back(best ? alphabet.encode(best->text) : recog::Labels{});
    }
  }
  const Tensor logits = pipeline::oracle_logits(labels, recog::kTimeSteps, alphabet.classes(), alphabet.blank());
  {
    PtarArchive a;
    a.add("logits", logits);
    save("logits.ptar", a);
  }
  const auto probs = recog::softmax_output(logits);

  recog::RuleSet rules;
  rules.allowed_lengths = {7};
  for (char c = 'A'; c <= 'Z'; ++c) rules.positions[0].insert(*alphabet.index_of(std::string(1, c)));

  std::vector<double> ctc_losses;
  std::size_t item = 0;
  for (auto& img : detections) {
    for (auto& det : img.detections) {
      const auto table = probs.item(item);
      const auto candidates = recog::beam_search_decode(table, alphabet.blank());
      const auto outcome = recog::apply_rules(candidates, rules);
      det.text = alphabet.decode(outcome.labels);
      std::vector<double> frame_logits(recog::kTimeSteps * alphabet.classes());
      for (std::size_t t = 0; t < recog::kTimeSteps; ++t) {
        for (std::size_t k = 0; k < alphabet.classes(); ++k) {
          frame_logits[t * alphabet.classes() + k] =
              logits.storage()[(t * probs.batch() + item) * alphabet.classes() + k];
        }
      }
      const auto ctc = ctc::ctc_loss<double>(frame_logits, recog::kTimeSteps, alphabet.classes(), labels[item],
                                             alphabet.blank());
      if (ctc.feasible) ctc_losses.push_back(ctc.loss);
      log.line("[recognize] %-12s text=%s verified=%d log_prob=%.9f ctc=%.9f", img.id.c_str(), det.text.c_str(),
               outcome.verified ? 1 : 0, candidates.front().log_prob, ctc.loss);
      ++item;
    }
  }
  save_json("detections.json", detections_to_json(detections));

  metrics::EvalConfig e2e_cfg{0.7, false, true};
  const auto e2e = metrics::eval_e2e(pipeline::join_for_eval(detections, annotations), e2e_cfg);
  log.line("[eval] end-to-end accuracy=%.6f (%zu/%zu)", e2e.accuracy, e2e.correct, e2e.ground_truth);
  check("end-to-end accuracy 1.0", e2e.accuracy_defined && e2e.accuracy == 1.0);

  // Training objective for an ideal prediction: regression maps equal to the
  // targets, heatmaps one-hot at the positives.
  losses::DetectionLoss det_loss;
  for (const auto& t : targets) {
    heatmap::DetectionMaps ideal = t.maps;
    for (Tensor* heat : {&ideal.center_heat, &ideal.corner_heat}) {
      for (float& v : heat->storage()) v = v == 1.0f ? 1.0f : 0.0f;
    }
    const auto l = losses::detection_loss(ideal, t);
    det_loss.center += l.center / static_cast<double>(targets.size());
    det_loss.wh += l.wh / static_cast<double>(targets.size());
    det_loss.center_off += l.center_off / static_cast<double>(targets.size());
    det_loss.corner += l.corner / static_cast<double>(targets.size());
    det_loss.corner_rel += l.corner_rel / static_cast<double>(targets.size());
    det_loss.corner_off += l.corner_off / static_cast<double>(targets.size());
    det_loss.total += l.total / static_cast<double>(targets.size());
    det_loss.n_center += l.n_center;
  }
  const auto loss = losses::total_loss(det_loss, ctc_losses);
  log.line("[loss] total=%.9g detection=%.9g recognition=%.9g", loss.total, loss.detection, loss.recognition);
  check("perfect-prediction loss small", loss.detection < 1e-3 && loss.has_recognition);

  // Every archive written above must read back bit-exactly.
  std::size_t exact = 0, archives = 0;
  for (const auto& rel : report.artifacts) {
    if (rel.extension() != ".ptar") continue;
    ++archives;
    std::ifstream in(options.out_dir / rel, std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (ptar_encode(ptar_decode(bytes)) == bytes) ++exact;
  }
  log.line("[ptar] %zu/%zu archives round-trip bit-exact", exact, archives);
  check("ptar round trips", exact == archives && archives > 0);

  log.line("selftest: %s", report.passed() ? "PASS" : "FAIL");
  report.log = std::move(log.text());
  std::ofstream(options.out_dir / "selftest.log", std::ios::binary) << report.log;
  report.artifacts.emplace_back("selftest.log");
  return report;
}

}  // namespace lpr::selftest
