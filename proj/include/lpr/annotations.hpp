#pragma once

// JSON documents exchanged by the CLI.
//
// Annotations: {"images":[{"id","width","height","plates":[{"box":[x1,y1,x2,y2],
//   "corners":[[x,y] x 4 in LT,RT,LD,RD order],"text":"..."}]}]}
// Detections:  {"images":[{"id","width","height","detections":[{"box","score",
//   "corners","corner_scores","corner_source":["peak"|"regressed"],"center","cell":[y,x],"text"}]}]}
// Alphabet:    {"tokens":["0","1",...]}  (blank is implicit, after the last token)
// Rules:       {"lengths":[7],"positions":{"0":["A","B"],"1":["0","1"]}}

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "lpr/recognizer.hpp"
#include "lpr/types.hpp"

namespace lpr {

using json = nlohmann::json;

struct ImageAnnotations {
  std::string id;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<PlateAnnotation> plates;
};

struct ImageDetections {
  std::string id;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<Detection> detections;
};

json to_json(const PlateAnnotation& plate);
json annotations_to_json(const std::vector<ImageAnnotations>& images);
std::vector<ImageAnnotations> annotations_from_json(const json& doc);

json detections_to_json(const std::vector<ImageDetections>& images);
std::vector<ImageDetections> detections_from_json(const json& doc);

recog::Alphabet alphabet_from_json(const json& doc);
json alphabet_to_json(const recog::Alphabet& alphabet);
recog::RuleSet rules_from_json(const json& doc, const recog::Alphabet& alphabet);

/// Parses a file; malformed JSON becomes a ValidationError.
json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
void write_json(const std::filesystem::path& path, const json& doc);

}  // namespace lpr
