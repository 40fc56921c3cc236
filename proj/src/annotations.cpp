#include "lpr/annotations.hpp"

#include <fstream>

#include "lpr/error.hpp"

namespace lpr {
namespace {

std::string id_of(const json& image) {
  require(image.contains("id"), "json: image entry without id");
  const json& id = image.at("id");
  if (id.is_string()) return id.get<std::string>();
  require(id.is_number_integer(), "json: image id must be a string or integer");
  return std::to_string(id.get<long long>());
}

Box box_of(const json& j) {
  require(j.is_array() && j.size() == 4, "json: box must be [x1,y1,x2,y2]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

Quad quad_of(const json& j) {
  require(j.is_array() && j.size() == 4, "json: corners must hold four [x,y] points");
  Quad q;
  for (std::size_t k = 0; k < 4; ++k) {
    require(j[k].is_array() && j[k].size() == 2, "json: corner must be [x,y]");
    q[k] = {j[k][0].get<double>(), j[k][1].get<double>()};
  }
  return q;
}

json box_json(const Box& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

json quad_json(const Quad& q) {
  json out = json::array();
  for (const Point& p : q) out.push_back(json::array({p.x, p.y}));
  return out;
}

template <typename F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("json: ") + e.what());
  }
}

}  // namespace

json to_json(const PlateAnnotation& plate) {
  return {{"box", box_json(plate.box)}, {"corners", quad_json(plate.corners)}, {"text", plate.text}};
}

json annotations_to_json(const std::vector<ImageAnnotations>& images) {
  json list = json::array();
  for (const auto& img : images) {
    json plates = json::array();
    for (const auto& p : img.plates) plates.push_back(to_json(p));
    list.push_back({{"id", img.id}, {"width", img.width}, {"height", img.height}, {"plates", plates}});
  }
  return {{"images", list}};
}

std::vector<ImageAnnotations> annotations_from_json(const json& doc) {
  return guarded([&] {
    require(doc.is_object() && doc.contains("images") && doc["images"].is_array(),
            "json: annotations need an \"images\" array");
    std::vector<ImageAnnotations> out;
    for (const json& img : doc["images"]) {
      ImageAnnotations a;
      a.id = id_of(img);
      a.width = img.at("width").get<std::size_t>();
      a.height = img.at("height").get<std::size_t>();
      for (const json& p : img.value("plates", json::array())) {
        PlateAnnotation plate;
        plate.box = box_of(p.at("box"));
        plate.corners = quad_of(p.at("corners"));
        plate.text = p.value("text", "");
        a.plates.push_back(std::move(plate));
      }
      out.push_back(std::move(a));
    }
    return out;
  });
}

json detections_to_json(const std::vector<ImageDetections>& images) {
  json list = json::array();
  for (const auto& img : images) {
    json dets = json::array();
    for (const Detection& d : img.detections) {
      json sources = json::array();
      for (CornerSource s : d.corner_source) sources.push_back(s == CornerSource::peak ? "peak" : "regressed");
      dets.push_back({{"box", box_json(d.box)},
                      {"score", d.score},
                      {"corners", quad_json(d.corners)},
                      {"corner_scores", d.corner_scores},
                      {"corner_source", sources},
                      {"center", json::array({d.center.x, d.center.y})},
                      {"cell", json::array({d.cell_y, d.cell_x})},
                      {"text", d.text}});
    }
    list.push_back({{"id", img.id}, {"width", img.width}, {"height", img.height}, {"detections", dets}});
  }
  return {{"images", list}};
}

std::vector<ImageDetections> detections_from_json(const json& doc) {
  return guarded([&] {
    require(doc.is_object() && doc.contains("images") && doc["images"].is_array(),
            "json: detections need an \"images\" array");
    std::vector<ImageDetections> out;
    for (const json& img : doc["images"]) {
      ImageDetections a;
      a.id = id_of(img);
      a.width = img.value("width", std::size_t{0});
      a.height = img.value("height", std::size_t{0});
      for (const json& j : img.value("detections", json::array())) {
        Detection d;
        d.box = box_of(j.at("box"));
        d.score = j.value("score", 1.0);
        d.center = d.box.center();
        if (j.contains("corners")) {
          d.corners = quad_of(j["corners"]);
        } else {
          d.corners = {Point{d.box.x1, d.box.y1}, Point{d.box.x2, d.box.y1}, Point{d.box.x1, d.box.y2},
                       Point{d.box.x2, d.box.y2}};
        }
        if (j.contains("corner_scores")) d.corner_scores = j["corner_scores"].get<std::array<double, 4>>();
        if (j.contains("corner_source")) {
          const json& s = j["corner_source"];
          require(s.is_array() && s.size() == 4, "json: corner_source must have four entries");
          for (std::size_t k = 0; k < 4; ++k) {
            d.corner_source[k] = s[k].get<std::string>() == "peak" ? CornerSource::peak : CornerSource::regressed_fallback;
          }
        }
        if (j.contains("center")) d.center = {j["center"][0].get<double>(), j["center"][1].get<double>()};
        if (j.contains("cell")) {
          d.cell_y = j["cell"][0].get<std::size_t>();
          d.cell_x = j["cell"][1].get<std::size_t>();
        }
        d.text = j.value("text", "");
        a.detections.push_back(std::move(d));
      }
      out.push_back(std::move(a));
    }
    return out;
  });
}

recog::Alphabet alphabet_from_json(const json& doc) {
  return guarded([&] {
    const json& tokens = doc.is_array() ? doc : doc.at("tokens");
    require(tokens.is_array(), "json: alphabet tokens must be an array");
    return recog::Alphabet(tokens.get<std::vector<std::string>>());
  });
}

json alphabet_to_json(const recog::Alphabet& alphabet) { return {{"tokens", alphabet.tokens()}}; }

recog::RuleSet rules_from_json(const json& doc, const recog::Alphabet& alphabet) {
  return guarded([&] {
    recog::RuleSet rules;
    require(doc.is_object(), "json: rules must be an object");
    for (const json& l : doc.value("lengths", json::array())) rules.allowed_lengths.insert(l.get<std::size_t>());
    const json positions = doc.value("positions", json::object());
    for (const auto& [key, tokens] : positions.items()) {
      std::size_t pos = 0;
      try {
        pos = std::stoul(key);
      } catch (const std::exception&) {
        fail("json: rule position '" + key + "' is not an index");
      }
      std::set<int> allowed;
      for (const json& t : tokens) {
        const auto idx = alphabet.index_of(t.get<std::string>());
        require(idx.has_value(), "json: rule token '" + t.get<std::string>() + "' is not in the alphabet");
        allowed.insert(*idx);
      }
      require(!allowed.empty(), "json: rule position " + key + " has an empty subset");
      rules.positions[pos] = std::move(allowed);
    }
    return rules;
  });
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "json: cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("json: cannot parse '" + path.string() + "': " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), "json: cannot open '" + path.string() + "' for writing");
  out << doc.dump(2) << '\n';
}

}  // namespace lpr
