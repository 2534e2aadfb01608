#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsm/evaluation.hpp"
#include "dsm/mapper.hpp"
#include "dsm/model.hpp"
#include "dsm/simworld.hpp"

namespace dsm::io {

// Parse failure carrying "<source>:<line>: <message>".
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& message);
  const std::string& source() const { return source_; }
  std::size_t line() const { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

// Scan files: "dsm-scan v1" text or "DSMB1" little-endian binary.
void write_scan(std::ostream& out, const TrainingFrame& frame);
void write_scan_binary(std::ostream& out, const TrainingFrame& frame);
TrainingFrame read_scan(std::istream& in, const std::string& source);
void save_scan(const std::filesystem::path& path, const TrainingFrame& frame, bool binary = false);
TrainingFrame load_scan(const std::filesystem::path& path);

// Map files: header with the full configuration and registry, then one line
// per voxel "ix iy iz alpha_0..alpha_K-1 v_0..v_K-1" in key order. Voxel
// last_time is not stored and reads back as -1.
void write_map(std::ostream& out, const SemanticMap& map);
SemanticMap read_map(std::istream& in, const std::string& source);
void save_map(const std::filesystem::path& path, const SemanticMap& map);
SemanticMap load_map(const std::filesystem::path& path);

// Registry line "dsm-registry v1 classes=K free=f dynamic=a,b".
void write_registry(std::ostream& out, const ClassRegistry& registry);
ClassRegistry read_registry(std::istream& in, const std::string& source);

// Ground truth files, point-set or voxel-grid, with the registry in the header.
void write_ground_truth(std::ostream& out, const GroundTruthModel& gt, const ClassRegistry& registry);
GroundTruthModel read_ground_truth(std::istream& in, const std::string& source, ClassRegistry* registry = nullptr);
void save_ground_truth(const std::filesystem::path& path, const GroundTruthModel& gt, const ClassRegistry& registry);
GroundTruthModel load_ground_truth(const std::filesystem::path& path, ClassRegistry* registry = nullptr);

// class,tp,fp,fn,precision,recall,iou rows plus a __mean__ row.
void write_report_csv(std::ostream& out, const EvalReport& report);

// INI-style files: "[section]" headers, "key = value" lines, '#' comments.
struct ConfigFile {
  MapConfig config;
  std::optional<ClassRegistry> registry;
};
ConfigFile read_config(std::istream& in, const std::string& source);
ConfigFile load_config(const std::filesystem::path& path);
void write_config(std::ostream& out, const MapConfig& config, const std::optional<ClassRegistry>& registry);

WorldSpec read_world(std::istream& in, const std::string& source);
WorldSpec load_world(const std::filesystem::path& path);

}  // namespace dsm::io
