#include "secdb/region.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace secdb {

using json = nlohmann::json;

std::string region_to_json(const PrunedRegion& region) {
  json j;
  j["spheres"] = json::array();
  for (const auto& s : region.spheres) {
    json js;
    js["center"] = json::array();
    for (int i = 0; i < s.center.size(); ++i) js["center"].push_back(s.center[i]);
    js["radius"] = s.radius;
    js["contingencies"] = s.contingencies;
    j["spheres"].push_back(js);
  }
  return j.dump(2) + "\n";
}

PrunedRegion region_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("region file is not valid JSON: ") + e.what());
  }
  PrunedRegion region;
  if (!j.contains("spheres") || !j["spheres"].is_array())
    throw Error("region file: missing 'spheres' array");
  for (const auto& js : j["spheres"]) {
    Hypersphere s;
    if (!js.contains("center") || !js["center"].is_array())
      throw Error("region sphere: missing 'center' array");
    s.center.resize(js["center"].size());
    for (size_t i = 0; i < js["center"].size(); ++i) s.center[int(i)] = js["center"][i];
    if (!js.contains("radius")) throw Error("region sphere: missing 'radius'");
    s.radius = js["radius"].get<double>();
    if (js.contains("contingencies"))
      s.contingencies = js["contingencies"].get<std::vector<int>>();
    region.spheres.push_back(std::move(s));
  }
  return region;
}

void save_region_file(const std::string& path, const PrunedRegion& region) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write region file: " + path);
  out << region_to_json(region);
}

PrunedRegion load_region_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open region file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return region_from_json(ss.str());
}

}  // namespace secdb
