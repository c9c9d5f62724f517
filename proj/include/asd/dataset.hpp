// Corpus ingestion for the task directory convention.
//
// Layout:   <root>/<machine_type>/train/*.wav
//           <root>/<machine_type>/test/*.wav
//           <root>/<machine_type>/attributes_00.csv   (optional)
//
// Filenames follow
//   section_{NN}_{domain}_{split}_{condition}_{IIII}_{attr tokens}.wav
// where the attribute segment is underscore-joined key/value pairs
// ("vel_31" or "vel_31_amp_6") or the sentinel "noAttributes" when the
// machine's attributes are concealed. Unlabeled evaluation test clips use the
// short form section_{NN}_test_{IIII}.wav (no domain, condition, attributes).
//
// The attribute CSV schema is a project convention (the task description
// only says attribute csvs exist): header row
// `file_name,attr_key_1,attr_value_1,...`, UTF-8, comma-separated.
#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "asd/common.hpp"

namespace asd::dataset {

// Mono PCM observation. samples are normalized to [-1, 1] by 1/32768.
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 16000;

  std::size_t length() const { return samples.size(); }
};

struct ClipMetadata {
  std::string machine_type;  // filled by scan_dataset (directory name)
  std::string section;       // two digits, e.g. "00"
  Domain domain = Domain::kUnknown;
  Split split = Split::kTest;
  Condition condition = Condition::kUnknown;
  int clip_index = 0;
  std::vector<std::pair<std::string, std::string>> attributes;
  bool concealed = false;   // "noAttributes" sentinel seen
  bool unlabeled = false;   // short evaluation-form filename

  bool operator==(const ClipMetadata&) const = default;
};

// Parses one filename (no directory part). Throws ParseError naming the
// offending segment.
ClipMetadata parse_clip_filename(const std::string& name);

// Inverse of parse_clip_filename; parse(render(m)) == m.
std::string render_clip_filename(const ClipMetadata& meta);

// Strict reader: RIFF/WAVE, PCM 16-bit, mono, 16 kHz. Throws
// ValidationError identifying the first mismatching field.
AudioClip load_wav(const fs::path& path);

// PCM16 mono writer used by the synthetic generator and the tests.
// Samples are clamped to [-1, 1] and scaled by 32768.
void write_wav(const fs::path& path, const std::vector<float>& samples,
               int sample_rate = 16000);

struct CatalogEntry {
  fs::path path;
  ClipMetadata meta;
};

struct SectionClips {
  std::vector<CatalogEntry> train_source;
  std::vector<CatalogEntry> train_target;
  std::vector<CatalogEntry> test;
};

struct MachineData {
  // section id -> clips, ordered
  std::map<std::string, SectionClips> sections;
  fs::path attributes_csv;  // empty when absent
};

struct DatasetCatalog {
  fs::path root;
  std::map<std::string, MachineData> machines;
  // (path, reason) for files that did not parse; surfaced as warnings
  std::vector<std::pair<fs::path, std::string>> rejects;

  // Canonical text dump; two scans of the same tree render identically.
  std::string to_string() const;
};

// Walks <root>/<machine>/{train,test}. Deterministic (lexicographic by
// path). Throws ValidationError when root is missing or holds no machines.
DatasetCatalog scan_dataset(const fs::path& root);

enum class ValidationProfile { kDevelopment, kAdditionalTraining, kEvaluation, kCi };

ValidationProfile validation_profile_from_string(std::string_view s);
std::string to_string(ValidationProfile p);

struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

// Checks per machine/section counts and label rules against the profile.
// Violations are report entries, never exceptions.
//   development:         990 source-train, 10 target-train,
//                        100 normal-test, 100 anomaly-test
//   additional_training: 990 source-train, 10 target-train, no test
//   evaluation:          200 unlabeled test clips, no train
//   ci:                  20/5/10+10 (reduced profile for fast test runs)
ValidationReport validate_split(const DatasetCatalog& catalog,
                                ValidationProfile profile);

// filename -> ordered attribute pairs, from an attributes CSV.
std::map<std::string, std::vector<std::pair<std::string, std::string>>>
load_attributes(const fs::path& csv_path);

// Cross-checks CSV attributes against filename-embedded ones. Throws
// ValidationError listing the first offending clip.
void check_attribute_consistency(
    const DatasetCatalog& catalog,
    const std::string& machine,
    const std::map<std::string, std::vector<std::pair<std::string, std::string>>>&
        csv_attributes);

}  // namespace asd::dataset
