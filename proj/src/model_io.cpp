#include <json.hpp>

#include <fstream>
#include <sstream>

#include "coopgait/model.hpp"

namespace coopgait {

namespace {

using json = nlohmann::json;

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) throw ModelError(path + "." + key, "missing");
  return obj.at(key);
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ModelError(path, "expected a number");
  return j.get<double>();
}

Vec3 vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw ModelError(path, "expected a 3-vector");
  return Vec3(number(j[0], path + "[0]"), number(j[1], path + "[1]"), number(j[2], path + "[2]"));
}

Mat3 inertia(const json& j, const std::string& path) {
  if (j.is_number()) return Mat3::Identity() * j.get<double>();
  if (!j.is_array() || j.size() != 3) throw ModelError(path, "expected a scalar or 3x3 matrix");
  Mat3 m;
  for (int r = 0; r < 3; ++r) {
    const Vec3 row = vec3(j[r], path + "[" + std::to_string(r) + "]");
    m.row(r) = row.transpose();
  }
  return m;
}

JointType joint_type(const std::string& s, const std::string& path) {
  if (s == "fixed") return JointType::kFixed;
  if (s == "revolute") return JointType::kRevolute;
  if (s == "prismatic") return JointType::kPrismatic;
  if (s == "floating-base-planar") return JointType::kFloatingPlanar;
  if (s == "floating-base-spatial") return JointType::kFloatingSpatial;
  throw ModelError(path, "unknown joint type '" + s + "'");
}

std::pair<std::string, Vec3> attachment(const json& j, const std::string& path) {
  const auto& body = require(j, "body", path);
  if (!body.is_string()) throw ModelError(path + ".body", "expected a string");
  Vec3 offset = Vec3::Zero();
  if (j.contains("offset")) offset = vec3(j.at("offset"), path + ".offset");
  return {body.get<std::string>(), offset};
}

}  // namespace

RobotModel load_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ModelError("$", std::string("parse error: ") + e.what());
  }
  if (!doc.is_object()) throw ModelError("$", "expected an object");
  if (doc.contains("version") && doc.at("version") != 1) throw ModelError("version", "unsupported schema version");

  const auto& name = require(doc, "name", "$");
  if (!name.is_string()) throw ModelError("name", "expected a string");

  const auto& bodies_json = require(doc, "bodies", "$");
  if (!bodies_json.is_array()) throw ModelError("bodies", "expected a list");

  bool has_planar_base = false;
  std::vector<BodySpec> bodies;
  for (size_t i = 0; i < bodies_json.size(); ++i) {
    const std::string path = "bodies[" + std::to_string(i) + "]";
    const auto& b = bodies_json[i];
    BodySpec spec;
    const auto& bname = require(b, "name", path);
    if (!bname.is_string()) throw ModelError(path + ".name", "expected a string");
    spec.name = bname.get<std::string>();
    spec.mass = number(require(b, "mass", path), path + ".mass");
    spec.com = b.contains("com") ? vec3(b.at("com"), path + ".com") : Vec3::Zero();
    spec.inertia = inertia(require(b, "inertia", path), path + ".inertia");
    const auto& j = require(b, "joint", path);
    const auto& type = require(j, "type", path + ".joint");
    if (!type.is_string()) throw ModelError(path + ".joint.type", "expected a string");
    spec.joint = joint_type(type.get<std::string>(), path + ".joint.type");
    has_planar_base = has_planar_base || spec.joint == JointType::kFloatingPlanar;
    if (j.contains("name")) spec.joint_name = j.at("name").get<std::string>();
    if (j.contains("parent") && !j.at("parent").is_null()) {
      if (!j.at("parent").is_string()) throw ModelError(path + ".joint.parent", "expected a string");
      spec.parent = j.at("parent").get<std::string>();
    }
    if (j.contains("origin")) spec.origin = vec3(j.at("origin"), path + ".joint.origin");
    if (j.contains("axis")) spec.axis = vec3(j.at("axis"), path + ".joint.axis");
    bodies.push_back(spec);
  }

  const bool planar = doc.contains("planar") ? doc.at("planar").get<bool>() : has_planar_base;
  Vec3 gravity = planar ? Vec3(0, -9.81, 0) : Vec3(0, 0, -9.81);
  if (doc.contains("gravity")) gravity = vec3(doc.at("gravity"), "gravity");

  std::vector<std::pair<std::string, std::pair<std::string, Vec3>>> contacts;
  if (doc.contains("contacts")) {
    const auto& cj = doc.at("contacts");
    if (!cj.is_array()) throw ModelError("contacts", "expected a list");
    for (size_t i = 0; i < cj.size(); ++i) {
      const std::string path = "contacts[" + std::to_string(i) + "]";
      const auto& cname = require(cj[i], "name", path);
      contacts.push_back({cname.get<std::string>(), attachment(cj[i], path)});
    }
  }
  std::optional<std::pair<std::string, Vec3>> ee;
  if (doc.contains("end_effector")) ee = attachment(doc.at("end_effector"), "end_effector");
  std::optional<std::pair<std::string, Vec3>> sp;
  if (doc.contains("speed_point")) sp = attachment(doc.at("speed_point"), "speed_point");

  std::vector<std::string> actuated;
  if (doc.contains("actuated")) {
    const auto& aj = doc.at("actuated");
    if (!aj.is_array()) throw ModelError("actuated", "expected a list");
    for (size_t i = 0; i < aj.size(); ++i) {
      if (!aj[i].is_string()) throw ModelError("actuated[" + std::to_string(i) + "]", "expected a string");
      actuated.push_back(aj[i].get<std::string>());
    }
  }
  return RobotModel(name.get<std::string>(), gravity, planar, bodies, contacts, ee, sp, actuated);
}

RobotModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError(path, "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_model(ss.str());
}

}  // namespace coopgait
