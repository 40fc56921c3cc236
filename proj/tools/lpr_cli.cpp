// lpr: command-line front end for the plate detection/recognition pipeline.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lpr/annotations.hpp"
#include "lpr/ctc.hpp"
#include "lpr/error.hpp"
#include "lpr/fixtures.hpp"
#include "lpr/heatmap.hpp"
#include "lpr/metrics.hpp"
#include "lpr/pipeline.hpp"
#include "lpr/ptar.hpp"
#include "lpr/rectifier.hpp"
#include "lpr/recognizer.hpp"
#include "lpr/selftest.hpp"

namespace {

using namespace lpr;
constexpr int kValidationExit = 2;

void emit(const json& doc, const std::string& out) {
  if (out.empty()) {
    std::cout << doc.dump(2) << '\n';
  } else {
    write_json(out, doc);
  }
}

// "1,2,3" -> indices; several items separated by '|'.
std::vector<recog::Labels> parse_labels(const std::string& spec, const recog::Alphabet* alphabet) {
  std::vector<recog::Labels> out;
  std::stringstream items(spec);
  std::string item;
  while (std::getline(items, item, '|')) {
    if (alphabet != nullptr) {
      out.push_back(alphabet->encode(item));
      continue;
    }
    recog::Labels label;
    std::stringstream parts(item);
    std::string part;
    while (std::getline(parts, part, ',')) {
      if (part.empty()) continue;
      std::size_t used = 0;
      int v = 0;
      try {
        v = std::stoi(part, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      require(used == part.size(), "labels: '" + part + "' is not an integer index");
      label.push_back(v);
    }
    out.push_back(std::move(label));
  }
  if (!spec.empty() && spec.back() == '|') out.emplace_back();
  if (out.empty()) out.emplace_back();
  return out;
}

json candidates_json(const std::vector<recog::Candidate>& cands, const recog::Alphabet& alphabet) {
  json list = json::array();
  for (const auto& c : cands) list.push_back({{"text", alphabet.decode(c.labels)}, {"log_prob", c.log_prob}});
  return list;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"License plate detection and recognition toolkit"};
  app.require_subcommand(1);

  // gen-fixtures
  std::string fx_out;
  std::size_t fx_count = 8;
  std::uint64_t fx_seed = 1;
  std::string fx_difficulty = "axis-aligned";
  auto* gen = app.add_subcommand("gen-fixtures", "Render synthetic plate scenes with exact annotations");
  gen->add_option("--out", fx_out, "Output directory")->required();
  gen->add_option("--count", fx_count, "Number of scenes")->check(CLI::PositiveNumber);
  gen->add_option("--seed", fx_seed, "Master seed");
  gen->add_option("--difficulty", fx_difficulty, "axis-aligned | rotated | tilted");

  // encode-targets
  std::string enc_ann, enc_out;
  auto* enc = app.add_subcommand("encode-targets", "Rasterize annotations into training target maps");
  enc->add_option("--ann", enc_ann, "Annotation JSON")->required()->check(CLI::ExistingFile);
  enc->add_option("--out", enc_out, "Output PTAR")->required();

  // decode
  std::string dec_maps, dec_out, dec_ann;
  std::size_t dec_topk = 8;
  double dec_threshold = 0.3;
  auto* dec = app.add_subcommand("decode", "Decode detection maps into boxes and corners");
  dec->add_option("--maps", dec_maps, "Map PTAR")->required()->check(CLI::ExistingFile);
  dec->add_option("--topk", dec_topk, "Maximum peaks per heatmap")->check(CLI::PositiveNumber);
  dec->add_option("--threshold", dec_threshold, "Peak score threshold");
  dec->add_option("--out", dec_out, "Detection JSON (stdout if omitted)");
  dec->add_option("--ann", dec_ann, "Annotation JSON supplying image ids and sizes")->check(CLI::ExistingFile);

  // rectify
  std::string rec_features, rec_det, rec_out;
  auto* rect = app.add_subcommand("rectify", "Crop and rectify plate features");
  rect->add_option("--features", rec_features, "PTAR holding 'shared' (B x C x H x W)")
      ->required()
      ->check(CLI::ExistingFile);
  rect->add_option("--det", rec_det, "Detection JSON")->required()->check(CLI::ExistingFile);
  rect->add_option("--out", rec_out, "Output PTAR")->required();

  // recognize
  std::string rg_crops, rg_weights, rg_logits, rg_alphabet, rg_rules, rg_det, rg_out;
  std::size_t rg_beam = 10, rg_nbest = 5;
  auto* rg = app.add_subcommand("recognize", "Decode plate strings from crops or logits");
  auto* crops_opt = rg->add_option("--crops", rg_crops, "Rectified crop PTAR")->check(CLI::ExistingFile);
  auto* weights_opt = rg->add_option("--weights", rg_weights, "Head weight PTAR")->check(CLI::ExistingFile);
  auto* logits_opt = rg->add_option("--logits", rg_logits, "Logit PTAR (T x B x K)")->check(CLI::ExistingFile);
  crops_opt->needs(weights_opt);
  weights_opt->needs(crops_opt);
  logits_opt->excludes(crops_opt)->excludes(weights_opt);
  rg->add_option("--alphabet", rg_alphabet, "Alphabet JSON")->required()->check(CLI::ExistingFile);
  rg->add_option("--rules", rg_rules, "Rule JSON")->check(CLI::ExistingFile);
  rg->add_option("--beam-width", rg_beam, "Beam width")->check(CLI::PositiveNumber);
  rg->add_option("--n-best", rg_nbest, "Candidates kept")->check(CLI::PositiveNumber);
  rg->add_option("--det", rg_det, "Detection JSON to annotate with texts")->check(CLI::ExistingFile);
  rg->add_option("--out", rg_out, "Output JSON (stdout if omitted)");

  // ctc-loss
  std::string ctc_logits, ctc_labels, ctc_grad, ctc_alphabet;
  auto* ctc_cmd = app.add_subcommand("ctc-loss", "CTC loss and logit gradient");
  ctc_cmd->add_option("--logits", ctc_logits, "Logit PTAR (T x B x K or T x K)")
      ->required()
      ->check(CLI::ExistingFile);
  ctc_cmd->add_option("--labels", ctc_labels, "Comma-separated class indices, items separated by '|'")->required();
  ctc_cmd->add_option("--alphabet", ctc_alphabet, "Read --labels as text in this alphabet")
      ->check(CLI::ExistingFile);
  ctc_cmd->add_option("--grad", ctc_grad, "Write the gradient (same shape as the logits)");

  // eval
  std::string ev_pred, ev_gt;
  double ev_iou = 0.5;
  bool ev_e2e = false, ev_one = false;
  auto* ev = app.add_subcommand("eval", "Detection precision or end-to-end accuracy");
  ev->add_option("--pred", ev_pred, "Detection JSON")->required()->check(CLI::ExistingFile);
  ev->add_option("--gt", ev_gt, "Annotation JSON")->required()->check(CLI::ExistingFile);
  ev->add_option("--iou", ev_iou, "IoU threshold in (0, 1)");
  ev->add_flag("--e2e", ev_e2e, "Also require exact string match");
  ev->add_flag("--one-per-image", ev_one, "Keep only the best prediction per image");

  // selftest
  selftest::Options st;
  std::string st_out = st.out_dir.string();
  auto* stc = app.add_subcommand("selftest", "Run the full pipeline on fixtures and verify it");
  stc->add_option("--out", st_out, "Artifact directory");
  stc->add_option("--seed", st.seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidationExit;
  }

  try {
    if (*gen) {
      const auto scenes = fixtures::gen_fixtures(fx_count, fx_seed, fixtures::parse_difficulty(fx_difficulty));
      fixtures::write_fixtures(fx_out, scenes);
      // Oracle logits and the alphabet so `recognize --logits` can run on the set.
      const auto alphabet = recog::Alphabet::alphanumeric();
      std::vector<recog::Labels> labels;
      for (const auto& s : scenes) labels.push_back(alphabet.encode(s.annotations.front().text));
      PtarArchive logits;
      logits.add("logits",
                 pipeline::oracle_logits(labels, recog::kTimeSteps, alphabet.classes(), alphabet.blank()));
      ptar_write(std::filesystem::path(fx_out) / "oracle_logits.ptar", logits);
      write_json(std::filesystem::path(fx_out) / "alphabet.json", alphabet_to_json(alphabet));
      std::printf("wrote %zu %s scenes to %s\n", scenes.size(), fx_difficulty.c_str(), fx_out.c_str());
    } else if (*enc) {
      const auto images = annotations_from_json(read_json(enc_ann));
      require(!images.empty(), "encode-targets: no images in annotations");
      std::vector<heatmap::DetectionTargets> targets;
      for (const auto& img : images) targets.push_back(heatmap::encode_targets(img.plates, img.width, img.height));
      ptar_write(enc_out, pipeline::targets_to_archive(targets));
      std::printf("encoded %zu images into %s\n", images.size(), enc_out.c_str());
    } else if (*dec) {
      const auto maps = pipeline::maps_from_archive(ptar_read(dec_maps));
      std::vector<ImageAnnotations> ann;
      if (!dec_ann.empty()) {
        ann = annotations_from_json(read_json(dec_ann));
        require(ann.size() == maps.size(), "decode: annotation image count does not match the map batch");
      }
      require(dec_threshold >= 0.0 && dec_threshold <= 1.0, "decode: threshold must be in [0, 1]");
      std::vector<ImageDetections> out;
      for (std::size_t b = 0; b < maps.size(); ++b) {
        heatmap::DecodeOptions opt;
        opt.max_k = dec_topk;
        opt.threshold = dec_threshold;
        ImageDetections img;
        if (ann.empty()) {
          char id[16];
          std::snprintf(id, sizeof id, "%04zu", b);
          img.id = id;
          img.width = maps[b].width() * heatmap::kStride;
          img.height = maps[b].height() * heatmap::kStride;
        } else {
          img.id = ann[b].id;
          img.width = ann[b].width;
          img.height = ann[b].height;
        }
        opt.image_width = static_cast<double>(img.width);
        opt.image_height = static_cast<double>(img.height);
        img.detections = heatmap::decode(maps[b], opt);
        out.push_back(std::move(img));
      }
      emit(detections_to_json(out), dec_out);
    } else if (*rect) {
      const PtarArchive features = ptar_read(rec_features);
      const Tensor& shared = features.contains("shared") || features.size() != 1 ? features.get("shared")
                                                                                 : features.entries().front().tensor;
      require(shared.rank() == 4, "rectify: features must be B x C x H x W");
      const auto dets = detections_from_json(read_json(rec_det));
      require(dets.size() == shared.batch(), "rectify: detection image count does not match the feature batch");
      std::vector<std::vector<Detection>> per_image;
      for (const auto& d : dets) per_image.push_back(d.detections);
      const auto batch = rectify::rectify_plates(shared, per_image);
      PtarArchive out;
      out.add("crops", batch.crops);
      Tensor flags({batch.rectified.size() == 0 ? std::size_t{1} : batch.rectified.size()}, 0.0f);
      for (std::size_t i = 0; i < batch.rectified.size(); ++i) flags.storage()[i] = batch.rectified[i] ? 1.0f : 0.0f;
      if (!batch.rectified.empty()) out.add("rectified", flags);
      ptar_write(rec_out, out);
      std::printf("rectified %zu plates into %s\n", batch.rectified.size(), rec_out.c_str());
    } else if (*rg) {
      require(!rg_logits.empty() || !rg_crops.empty(), "recognize: give --logits or --crops with --weights");
      const auto alphabet = alphabet_from_json(read_json(rg_alphabet));
      recog::RecognitionOutput output;
      if (!rg_logits.empty()) {
        output = recog::softmax_output(pipeline::logits_from_archive(ptar_read(rg_logits)));
      } else {
        const auto weights = recog::HeadWeights::from_archive(ptar_read(rg_weights));
        const PtarArchive crops = ptar_read(rg_crops);
        output = recog::head_forward(crops.contains("crops") ? crops.get("crops") : crops.entries().at(0).tensor,
                                     weights);
      }
      require(output.classes() == alphabet.classes(), "recognize: class count " + std::to_string(output.classes()) +
                                                          " does not match alphabet size + blank (" +
                                                          std::to_string(alphabet.classes()) + ")");
      recog::RuleSet rules;
      if (!rg_rules.empty()) rules = rules_from_json(read_json(rg_rules), alphabet);

      json items = json::array();
      std::vector<std::string> texts;
      for (std::size_t b = 0; b < output.batch(); ++b) {
        const auto cands = recog::beam_search_decode(output.item(b), alphabet.blank(), rg_beam, rg_nbest);
        const auto outcome = recog::apply_rules(cands, rules);
        texts.push_back(alphabet.decode(outcome.labels));
        items.push_back({{"index", b},
                         {"text", texts.back()},
                         {"verified", outcome.verified},
                         {"candidates", candidates_json(cands, alphabet)}});
      }
      if (!rg_det.empty()) {
        auto dets = detections_from_json(read_json(rg_det));
        std::size_t total = 0;
        for (const auto& img : dets) total += img.detections.size();
        require(total == texts.size(), "recognize: detection count does not match the recognition batch");
        std::size_t i = 0;
        for (auto& img : dets) {
          for (auto& d : img.detections) d.text = texts[i++];
        }
        emit(detections_to_json(dets), rg_out);
      } else {
        emit({{"items", items}}, rg_out);
      }
    } else if (*ctc_cmd) {
      const PtarArchive archive = ptar_read(ctc_logits);
      const Tensor logits = pipeline::logits_from_archive(archive);
      const std::size_t steps = logits.dim(0), batch = logits.dim(1), classes = logits.dim(2);
      std::optional<recog::Alphabet> alphabet;
      if (!ctc_alphabet.empty()) alphabet = alphabet_from_json(read_json(ctc_alphabet));
      require(!alphabet || alphabet->classes() == classes, "ctc-loss: alphabet does not match the class count");
      const auto labels = parse_labels(ctc_labels, alphabet ? &*alphabet : nullptr);
      require(labels.size() == batch, "ctc-loss: got " + std::to_string(labels.size()) + " labels for batch " +
                                          std::to_string(batch));
      const int blank = static_cast<int>(classes) - 1;
      Tensor grad(logits.dims(), 0.0f);
      json items = json::array();
      for (std::size_t b = 0; b < batch; ++b) {
        std::vector<double> frame(steps * classes);
        for (std::size_t t = 0; t < steps; ++t) {
          for (std::size_t k = 0; k < classes; ++k) frame[t * classes + k] = logits.storage()[(t * batch + b) * classes + k];
        }
        for (int v : labels[b]) {
          require(v >= 0 && v < blank, "ctc-loss: label index " + std::to_string(v) + " outside [0, " +
                                           std::to_string(blank) + ")");
        }
        const auto r = ctc::ctc_loss<double>(frame, steps, classes, labels[b], blank);
        for (std::size_t t = 0; t < steps; ++t) {
          for (std::size_t k = 0; k < classes; ++k) {
            grad.storage()[(t * batch + b) * classes + k] = static_cast<float>(r.grad[t * classes + k]);
          }
        }
        json loss = r.feasible ? json(r.loss) : json("inf");
        items.push_back({{"index", b}, {"loss", loss}, {"feasible", r.feasible}});
      }
      if (!ctc_grad.empty()) {
        PtarArchive g;
        g.add("grad", archive.contains("logits") || archive.size() != 1
                          ? grad.reshaped(archive.get("logits").dims())
                          : grad.reshaped(archive.entries().front().tensor.dims()));
        ptar_write(ctc_grad, g);
      }
      emit({{"items", items}}, "");
    } else if (*ev) {
      metrics::EvalConfig cfg{ev_iou, ev_one, ev_e2e};
      cfg.validate();
      const auto gt = annotations_from_json(read_json(ev_gt));
      const auto pred = detections_from_json(read_json(ev_pred));
      const auto joined = pipeline::join_for_eval(pred, gt);
      const auto d = metrics::eval_detection(joined, cfg);
      json doc = {{"iou_threshold", cfg.iou_threshold},
                  {"one_prediction_per_image", cfg.one_prediction_per_image},
                  {"detection",
                   {{"predictions", d.predictions},
                    {"ground_truth", d.ground_truth},
                    {"correct", d.correct},
                    {"precision", d.precision},
                    {"precision_defined", d.precision_defined}}}};
      if (d.recall_defined) doc["detection"]["recall"] = d.recall;
      if (d.degenerate_boxes > 0) std::fprintf(stderr, "warning: %zu degenerate boxes scored IoU 0\n", d.degenerate_boxes);
      if (cfg.e2e) {
        const auto e = metrics::eval_e2e(joined, cfg);
        doc["e2e"] = {{"correct", e.correct},
                      {"ground_truth", e.ground_truth},
                      {"accuracy", e.accuracy},
                      {"accuracy_defined", e.accuracy_defined},
                      {"precision", e.precision}};
      }
      emit(doc, "");
    } else if (*stc) {
      st.out_dir = st_out;
      const auto report = selftest::run(st);
      std::fputs(report.log.c_str(), stdout);
      return report.passed() ? 0 : 1;
    }
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidationExit;
  }
  return 0;
}
