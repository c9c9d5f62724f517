#include "asd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace asd::dataset {

namespace {

std::vector<std::string> split_tokens(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

bool all_digits(const std::string& s) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isdigit(c); });
}

std::string pad4(int v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", v);
  return buf;
}

}  // namespace

ClipMetadata parse_clip_filename(const std::string& name) {
  static const std::string suffix = ".wav";
  if (name.size() <= suffix.size() ||
      name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0)
    throw ParseError("'" + name + "': missing .wav suffix");
  const std::string stem = name.substr(0, name.size() - suffix.size());
  const auto tok = split_tokens(stem, '_');

  if (tok.size() < 2 || tok[0] != "section")
    throw ParseError("'" + name + "': expected leading 'section' segment");
  if (tok[1].size() != 2 || !all_digits(tok[1]))
    throw ParseError("'" + name + "': bad section '" + tok[1] + "'");

  ClipMetadata meta;
  meta.section = tok[1];

  // Short evaluation form: section_NN_test_IIII.wav
  if (tok.size() == 4 && tok[2] == "test") {
    if (tok[3].size() != 4 || !all_digits(tok[3]))
      throw ParseError("'" + name + "': bad clip index '" + tok[3] + "'");
    meta.domain = Domain::kUnknown;
    meta.split = Split::kTest;
    meta.condition = Condition::kUnknown;
    meta.clip_index = std::stoi(tok[3]);
    meta.unlabeled = true;
    return meta;
  }

  if (tok.size() < 7)
    throw ParseError("'" + name + "': expected 7+ segments, found " +
                     std::to_string(tok.size()));

  if (tok[2] == "source")
    meta.domain = Domain::kSource;
  else if (tok[2] == "target")
    meta.domain = Domain::kTarget;
  else
    throw ParseError("'" + name + "': unknown domain '" + tok[2] + "'");

  if (tok[3] == "train")
    meta.split = Split::kTrain;
  else if (tok[3] == "test")
    meta.split = Split::kTest;
  else
    throw ParseError("'" + name + "': unknown split '" + tok[3] + "'");

  if (tok[4] == "normal")
    meta.condition = Condition::kNormal;
  else if (tok[4] == "anomaly")
    meta.condition = Condition::kAnomaly;
  else
    throw ParseError("'" + name + "': unknown condition '" + tok[4] + "'");

  if (tok[5].size() != 4 || !all_digits(tok[5]))
    throw ParseError("'" + name + "': bad clip index '" + tok[5] + "'");
  meta.clip_index = std::stoi(tok[5]);

  if (tok.size() == 7 && tok[6] == "noAttributes") {
    meta.concealed = true;
    return meta;
  }
  const std::size_t n_attr_tokens = tok.size() - 6;
  if (n_attr_tokens % 2 != 0)
    throw ParseError("'" + name +
                     "': attribute tokens must form key/value pairs");
  for (std::size_t i = 6; i < tok.size(); i += 2) {
    if (tok[i].empty() || tok[i + 1].empty())
      throw ParseError("'" + name + "': empty attribute token");
    meta.attributes.emplace_back(tok[i], tok[i + 1]);
  }
  return meta;
}

std::string render_clip_filename(const ClipMetadata& meta) {
  if (meta.section.size() != 2 || !all_digits(meta.section))
    throw ValidationError("bad section '" + meta.section + "'");
  if (meta.clip_index < 0 || meta.clip_index > 9999)
    throw ValidationError("clip index out of range");

  if (meta.unlabeled)
    return "section_" + meta.section + "_test_" + pad4(meta.clip_index) + ".wav";

  if (meta.domain == Domain::kUnknown)
    throw ValidationError("labeled filename requires a source/target domain");

  std::ostringstream os;
  os << "section_" << meta.section << '_' << asd::to_string(meta.domain) << '_'
     << asd::to_string(meta.split) << '_' << asd::to_string(meta.condition)
     << '_' << pad4(meta.clip_index);
  if (meta.concealed) {
    if (!meta.attributes.empty())
      throw ValidationError("concealed metadata must carry no attributes");
    os << "_noAttributes";
  } else {
    if (meta.attributes.empty())
      throw ValidationError(
          "labeled filename requires attributes or the concealed sentinel");
    for (const auto& [k, v] : meta.attributes) {
      if (k.empty() || v.empty() || k.find('_') != std::string::npos ||
          v.find('_') != std::string::npos)
        throw ValidationError("attribute tokens must be non-empty and '_'-free");
      os << '_' << k << '_' << v;
    }
  }
  os << ".wav";
  return os.str();
}

// --------------------------------------------------------------------------
// WAV I/O

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] |
                                    (static_cast<std::uint16_t>(p[1]) << 8));
}

void put_u32(std::string& s, std::uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

AudioClip load_wav(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = bytes.size();

  if (n < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    throw ValidationError(path.string() + ": not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::uint32_t data_size = 0;

  std::size_t off = 12;
  while (off + 8 <= n) {
    const char* id = bytes.data() + off;
    const std::uint32_t size = read_u32(p + off + 4);
    const std::size_t body = off + 8;
    if (body + size > n)
      throw ValidationError(path.string() + ": truncated chunk");
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16) throw ValidationError(path.string() + ": short fmt chunk");
      format = read_u16(p + body);
      channels = read_u16(p + body + 2);
      rate = read_u32(p + body + 4);
      bits = read_u16(p + body + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = p + body;
      data_size = size;
    }
    off = body + size + (size & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data == nullptr)
    throw ValidationError(path.string() + ": missing fmt or data chunk");
  if (format != 1)
    throw ValidationError(path.string() + ": expected PCM codec (1), found " +
                          std::to_string(format));
  if (channels != 1)
    throw ValidationError(path.string() + ": expected 1 channel, found " +
                          std::to_string(channels));
  if (rate != 16000)
    throw ValidationError(path.string() + ": expected 16000 Hz, found " +
                          std::to_string(rate));
  if (bits != 16)
    throw ValidationError(path.string() + ": expected 16-bit samples, found " +
                          std::to_string(bits));
  if (data_size % 2 != 0)
    throw ValidationError(path.string() + ": odd PCM16 data size");
  if (data_size == 0)
    throw ValidationError(path.string() + ": empty data chunk");

  AudioClip clip;
  clip.sample_rate = 16000;
  const std::size_t count = data_size / 2;
  clip.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::int16_t s = static_cast<std::int16_t>(
        static_cast<std::uint16_t>(data[2 * i]) |
        (static_cast<std::uint16_t>(data[2 * i + 1]) << 8));
    clip.samples[i] = static_cast<float>(s) / 32768.0f;
  }
  return clip;
}

void write_wav(const fs::path& path, const std::vector<float>& samples,
               int sample_rate) {
  const std::uint32_t data_size = static_cast<std::uint32_t>(samples.size() * 2);
  std::string out;
  out.reserve(44 + data_size);
  out.append("RIFF");
  put_u32(out, 36 + data_size);
  out.append("WAVE");
  out.append("fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate * 2));  // byte rate
  put_u16(out, 2);   // block align
  put_u16(out, 16);  // bits
  out.append("data");
  put_u32(out, data_size);
  for (const float x : samples) {
    long v = std::lround(static_cast<double>(x) * 32768.0);
    v = std::clamp(v, -32768l, 32767l);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
  write_text_file(path, out);
}

// --------------------------------------------------------------------------
// Catalog

DatasetCatalog scan_dataset(const fs::path& root) {
  if (!fs::exists(root) || !fs::is_directory(root))
    throw ValidationError("dataset root " + root.string() + " does not exist");

  DatasetCatalog catalog;
  catalog.root = root;

  std::vector<std::string> machine_names;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) machine_names.push_back(entry.path().filename().string());
  std::sort(machine_names.begin(), machine_names.end());

  std::size_t total_clips = 0;
  for (const auto& machine : machine_names) {
    MachineData data;
    const fs::path mdir = root / machine;
    const fs::path attr_csv = mdir / "attributes_00.csv";
    if (fs::exists(attr_csv)) data.attributes_csv = attr_csv;

    for (const char* split_dir : {"train", "test"}) {
      const fs::path dir = mdir / split_dir;
      if (!fs::exists(dir)) continue;
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".wav")
          files.push_back(entry.path());
      std::sort(files.begin(), files.end());

      for (const auto& file : files) {
        ClipMetadata meta;
        try {
          meta = parse_clip_filename(file.filename().string());
        } catch (const ParseError& e) {
          catalog.rejects.emplace_back(file, e.what());
          continue;
        }
        meta.machine_type = machine;
        const bool in_train = std::strcmp(split_dir, "train") == 0;
        if ((meta.split == Split::kTrain) != in_train) {
          catalog.rejects.emplace_back(
              file, "split segment '" + asd::to_string(meta.split) +
                        "' does not match directory '" + split_dir + "'");
          continue;
        }
        auto& section = data.sections[meta.section];
        if (meta.split == Split::kTrain) {
          if (meta.domain == Domain::kSource)
            section.train_source.push_back({file, meta});
          else
            section.train_target.push_back({file, meta});
        } else {
          section.test.push_back({file, meta});
        }
        ++total_clips;
      }
    }
    if (!data.sections.empty() || !data.attributes_csv.empty())
      catalog.machines.emplace(machine, std::move(data));
  }

  if (total_clips == 0 && catalog.rejects.empty())
    throw ValidationError("dataset root " + root.string() + " contains no clips");
  return catalog;
}

std::string DatasetCatalog::to_string() const {
  std::ostringstream os;
  for (const auto& [machine, data] : machines) {
    for (const auto& [section, clips] : data.sections) {
      const auto dump = [&](const char* tag, const std::vector<CatalogEntry>& list) {
        for (const auto& entry : list) {
          os << machine << '/' << section << '/' << tag << ' '
             << fs::relative(entry.path, root).generic_string() << ' '
             << asd::to_string(entry.meta.domain) << ' '
             << asd::to_string(entry.meta.condition) << ' '
             << entry.meta.clip_index << '\n';
        }
      };
      dump("train_source", clips.train_source);
      dump("train_target", clips.train_target);
      dump("test", clips.test);
    }
  }
  for (const auto& [path, reason] : rejects)
    os << "reject " << fs::relative(path, root).generic_string() << " " << reason
       << '\n';
  return os.str();
}

// --------------------------------------------------------------------------
// Split validation

ValidationProfile validation_profile_from_string(std::string_view s) {
  if (s == "development" || s == "dev") return ValidationProfile::kDevelopment;
  if (s == "additional_training" || s == "add")
    return ValidationProfile::kAdditionalTraining;
  if (s == "evaluation" || s == "eval") return ValidationProfile::kEvaluation;
  if (s == "ci") return ValidationProfile::kCi;
  throw ParseError("unknown profile '" + std::string(s) + "'");
}

std::string to_string(ValidationProfile p) {
  switch (p) {
    case ValidationProfile::kDevelopment: return "development";
    case ValidationProfile::kAdditionalTraining: return "additional_training";
    case ValidationProfile::kEvaluation: return "evaluation";
    case ValidationProfile::kCi: return "ci";
  }
  return "?";
}

namespace {

struct ExpectedCounts {
  std::size_t train_source = 0;
  std::size_t train_target = 0;
  std::size_t test_normal = 0;
  std::size_t test_anomaly = 0;
  bool test_unlabeled = false;
  std::size_t test_total = 0;  // used when test_unlabeled
};

ExpectedCounts expected_counts(ValidationProfile profile) {
  switch (profile) {
    case ValidationProfile::kDevelopment:
      return {990, 10, 100, 100, false, 0};
    case ValidationProfile::kAdditionalTraining:
      return {990, 10, 0, 0, false, 0};
    case ValidationProfile::kEvaluation:
      return {0, 0, 0, 0, true, 200};
    case ValidationProfile::kCi:
      return {20, 5, 10, 10, false, 0};
  }
  return {};
}

}  // namespace

ValidationReport validate_split(const DatasetCatalog& catalog,
                                ValidationProfile profile) {
  const ExpectedCounts want = expected_counts(profile);
  ValidationReport report;
  auto add = [&](const std::string& machine, const std::string& section,
                 const std::string& msg) {
    report.violations.push_back(machine + "/section " + section + ": " + msg);
  };
  auto count_check = [&](const std::string& machine, const std::string& section,
                         const char* what, std::size_t found, std::size_t expected) {
    if (found != expected)
      add(machine, section, std::string(what) + " expected " +
                               std::to_string(expected) + ", found " +
                               std::to_string(found));
  };

  for (const auto& [path, reason] : catalog.rejects)
    report.violations.push_back("reject: " + path.filename().string() + ": " +
                                reason);

  for (const auto& [machine, data] : catalog.machines) {
    for (const auto& [section, clips] : data.sections) {
      if (section != "00")
        add(machine, section, "section '" + section +
                                  "' not in declared section set {00}");

      // Train-side rules.
      for (const auto* list : {&clips.train_source, &clips.train_target})
        for (const auto& entry : *list)
          if (entry.meta.condition != Condition::kNormal)
            add(machine, section,
                "train clips must be normal: " + entry.path.filename().string());

      count_check(machine, section, "train/source", clips.train_source.size(),
                  want.train_source);
      count_check(machine, section, "train/target", clips.train_target.size(),
                  want.train_target);

      // Test-side rules.
      std::size_t normal = 0, anomaly = 0, unlabeled = 0;
      std::size_t normal_source = 0, normal_target = 0;
      for (const auto& entry : clips.test) {
        if (entry.meta.unlabeled) {
          ++unlabeled;
          continue;
        }
        if (entry.meta.condition == Condition::kNormal) {
          ++normal;
          (entry.meta.domain == Domain::kSource ? normal_source : normal_target)++;
        } else if (entry.meta.condition == Condition::kAnomaly) {
          ++anomaly;
        }
      }

      if (want.test_unlabeled) {
        if (normal + anomaly > 0)
          add(machine, section,
              "evaluation test clips must have condition=unknown (" +
                  std::to_string(normal + anomaly) + " labeled)");
        count_check(machine, section, "test", clips.test.size(), want.test_total);
        if (!clips.train_source.empty() || !clips.train_target.empty())
          add(machine, section, "evaluation profile must not contain train clips");
      } else {
        if (unlabeled > 0)
          add(machine, section,
              "test clips must carry domain and condition labels (" +
                  std::to_string(unlabeled) + " unlabeled)");
        count_check(machine, section, "test/normal", normal, want.test_normal);
        count_check(machine, section, "test/anomaly", anomaly, want.test_anomaly);
        if (want.test_normal > 0) {
          if (normal_source == 0)
            add(machine, section, "test normals missing domain source");
          if (normal_target == 0)
            add(machine, section, "test normals missing domain target");
        }
        if (want.test_normal == 0 && !clips.test.empty())
          add(machine, section,
              "additional_training profile must not contain test clips");
      }

      // Duplicate indices within one (split, domain, condition) group.
      std::set<std::string> seen;
      auto dup_check = [&](const std::vector<CatalogEntry>& list) {
        for (const auto& entry : list) {
          const auto& m = entry.meta;
          const std::string key = asd::to_string(m.split) + "/" +
                                  asd::to_string(m.domain) + "/" +
                                  asd::to_string(m.condition) + "/" +
                                  std::to_string(m.clip_index);
          if (!seen.insert(key).second)
            add(machine, section,
                "duplicate clip index: " + entry.path.filename().string());
        }
      };
      dup_check(clips.train_source);
      dup_check(clips.train_target);
      dup_check(clips.test);
    }

    // Attribute CSVs, when present, must agree with the filenames.
    if (!data.attributes_csv.empty()) {
      try {
        check_attribute_consistency(catalog, machine,
                                    load_attributes(data.attributes_csv));
      } catch (const Error& e) {
        report.violations.push_back(machine + ": " + e.what());
      }
    }
  }
  return report;
}

// --------------------------------------------------------------------------
// Attribute CSVs

std::map<std::string, std::vector<std::pair<std::string, std::string>>>
load_attributes(const fs::path& csv_path) {
  const std::string text = read_text_file(csv_path);
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line))
    throw ParseError(csv_path.string() + ": empty attribute csv");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_tokens(line, ',');
  if (header.empty() || header[0] != "file_name")
    throw ParseError(csv_path.string() + ": header must start with file_name");

  std::map<std::string, std::vector<std::pair<std::string, std::string>>> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_tokens(line, ',');
    if (cells.size() % 2 != 1)
      throw ParseError(csv_path.string() + ":" + std::to_string(lineno) +
                       ": cells after file_name must form key/value pairs");
    std::vector<std::pair<std::string, std::string>> attrs;
    for (std::size_t i = 1; i + 1 < cells.size(); i += 2)
      attrs.emplace_back(cells[i], cells[i + 1]);
    out[cells[0]] = std::move(attrs);
  }
  return out;
}

void check_attribute_consistency(
    const DatasetCatalog& catalog, const std::string& machine,
    const std::map<std::string, std::vector<std::pair<std::string, std::string>>>&
        csv_attributes) {
  const auto it = catalog.machines.find(machine);
  if (it == catalog.machines.end())
    throw ValidationError("machine '" + machine + "' not in catalog");
  for (const auto& [section, clips] : it->second.sections) {
    for (const auto* list :
         {&clips.train_source, &clips.train_target, &clips.test}) {
      for (const auto& entry : *list) {
        const std::string name = entry.path.filename().string();
        const auto row = csv_attributes.find(name);
        if (row == csv_attributes.end()) continue;
        if (entry.meta.concealed || entry.meta.unlabeled) continue;
        if (row->second != entry.meta.attributes)
          throw ValidationError("attribute csv disagrees with filename for " +
                                name);
      }
    }
  }
}

}  // namespace asd::dataset
