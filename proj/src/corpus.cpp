#include "blotcheck/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include <boost/tokenizer.hpp>
#include <curl/curl.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "blotcheck/error.hpp"

namespace blotcheck {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_row(const std::string& line) {
  using Sep = boost::escaped_list_separator<char>;
  boost::tokenizer<Sep> tok(line, Sep(std::string(), std::string(","), std::string("\"")));
  std::vector<std::string> fields;
  for (const auto& f : tok) {
    fields.push_back(trim(f));
  }
  return fields;
}

std::optional<Rgb> parse_hex_color(const std::string& text, int line_no) {
  if (text.empty()) {
    return std::nullopt;
  }
  std::string hex = text;
  if (hex.front() == '#') {
    hex.erase(0, 1);
  }
  if (hex.size() != 6 || !std::all_of(hex.begin(), hex.end(), ::isxdigit)) {
    throw Error(ErrorCode::MalformedManifest,
                "line " + std::to_string(line_no) + ": annotation_color must be RRGGBB");
  }
  const auto v = std::stoul(hex, nullptr, 16);
  return Rgb{static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>((v >> 8) & 0xFF),
             static_cast<std::uint8_t>(v & 0xFF)};
}

std::string format_hex_color(const std::optional<Rgb>& c) {
  if (!c) {
    return {};
  }
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%02X%02X%02X", c->r, c->g, c->b);
  return buf;
}

std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"") == std::string::npos) {
    return field;
  }
  std::string out = "\"";
  for (char ch : field) {
    out += ch;
    if (ch == '"') {
      out += '"';
    }
  }
  return out + "\"";
}

size_t curl_append(char* data, size_t size, size_t nmemb, void* user) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(user);
  out->insert(out->end(), data, data + size * nmemb);
  return size * nmemb;
}

std::vector<std::uint8_t> http_get(const std::string& url) {
  static std::once_flag curl_ready;
  std::call_once(curl_ready, [] { curl_global_init(CURL_GLOBAL_DEFAULT); });
  CURL* curl = curl_easy_init();
  if (!curl) {
    throw Error(ErrorCode::FetchFailed, "curl init failed");
  }
  std::vector<std::uint8_t> body;
  curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
  curl_easy_setopt(curl, CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(curl, CURLOPT_FAILONERROR, 1L);
  curl_easy_setopt(curl, CURLOPT_CONNECTTIMEOUT, 10L);
  curl_easy_setopt(curl, CURLOPT_TIMEOUT, 60L);
  curl_easy_setopt(curl, CURLOPT_NOSIGNAL, 1L);
  curl_easy_setopt(curl, CURLOPT_WRITEFUNCTION, curl_append);
  curl_easy_setopt(curl, CURLOPT_WRITEDATA, &body);
  const CURLcode rc = curl_easy_perform(curl);
  curl_easy_cleanup(curl);
  if (rc != CURLE_OK) {
    throw Error(ErrorCode::FetchFailed, url + ": " + curl_easy_strerror(rc));
  }
  return body;
}

}  // namespace

std::vector<FigureRecord> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open manifest " + path.string());
  }
  const fs::path base = path.parent_path();
  std::vector<FigureRecord> records;
  std::set<FigureKey> seen;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      continue;
    }
    auto fields = split_csv_row(line);
    if (!header_seen) {
      header_seen = true;
      if (!fields.empty() && fields[0] == "doi") {
        continue;
      }
    }
    if (fields.size() == 4) {
      fields.emplace_back();
    }
    if (fields.size() != 5) {
      throw Error(ErrorCode::MalformedManifest,
                  "line " + std::to_string(line_no) + ": expected 5 fields, got " +
                      std::to_string(fields.size()));
    }
    FigureRecord rec;
    rec.doi = fields[0];
    rec.figure_id = fields[1];
    rec.source = fields[2];
    if (rec.doi.empty() || rec.figure_id.empty() || rec.source.empty()) {
      throw Error(ErrorCode::MalformedManifest,
                  "line " + std::to_string(line_no) + ": doi, figure_id and source are required");
    }
    std::string label = fields[3];
    std::transform(label.begin(), label.end(), label.begin(), ::tolower);
    if (label == "clean") {
      rec.label = FigureLabel::Clean;
    } else if (label == "duplicated") {
      rec.label = FigureLabel::Duplicated;
    } else {
      throw Error(ErrorCode::MalformedManifest,
                  "line " + std::to_string(line_no) + ": label must be clean or duplicated");
    }
    rec.annotation_color = parse_hex_color(fields[4], line_no);
    if (!is_url(rec.source) && fs::path(rec.source).is_relative()) {
      rec.source = (base / rec.source).lexically_normal().string();
    }
    if (!seen.insert(rec.key()).second) {
      throw Error(ErrorCode::DuplicateKey, rec.doi + " / " + rec.figure_id);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_manifest(const std::vector<FigureRecord>& records, const fs::path& path) {
  std::ostringstream out;
  out << "doi,figure_id,source,label,annotation_color\n";
  for (const auto& r : records) {
    out << csv_quote(r.doi) << ',' << csv_quote(r.figure_id) << ',' << csv_quote(r.source) << ','
        << (r.label == FigureLabel::Duplicated ? "duplicated" : "clean") << ','
        << format_hex_color(r.annotation_color) << '\n';
  }
  const auto text = out.str();
  write_file_atomic(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

bool is_url(const std::string& source) {
  return source.rfind("http://", 0) == 0 || source.rfind("https://", 0) == 0;
}

std::string sha256_hex(const std::string& text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr);
  std::string hex;
  hex.reserve(len * 2);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

ImageBuffer fetch_figure(const FigureRecord& record, const fs::path& cache_dir) {
  if (!is_url(record.source)) {
    std::vector<std::uint8_t> bytes;
    try {
      bytes = read_file_bytes(record.source);
    } catch (const Error& e) {
      throw Error(ErrorCode::FetchFailed, e.what());
    }
    return decode_image(bytes);
  }
  const fs::path cached = cache_dir / (sha256_hex(record.source) + ".img");
  if (fs::exists(cached)) {
    return decode_image(read_file_bytes(cached));
  }
  const auto bytes = http_get(record.source);
  auto img = decode_image(bytes);
  write_file_atomic(cached, bytes);
  return img;
}

GroundTruth load_ground_truth(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, path.string() + ": " + e.what());
  }
  GroundTruth out;
  for (const auto& entry : doc) {
    FigureTruth t;
    t.doi = entry.at("doi").get<std::string>();
    t.figure_id = entry.at("figure_id").get<std::string>();
    for (const auto& b : entry.at("blocks")) {
      t.blocks.push_back({b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()});
    }
    for (const auto& p : entry.at("duplicate_pairs")) {
      t.duplicate_pairs.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
    }
    out.emplace(FigureKey{t.doi, t.figure_id}, std::move(t));
  }
  return out;
}

void write_ground_truth(const std::vector<FigureTruth>& truth, const fs::path& path) {
  auto doc = nlohmann::json::array();
  for (const auto& t : truth) {
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& r : t.blocks) {
      blocks.push_back({r.x, r.y, r.w, r.h});
    }
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& [a, b] : t.duplicate_pairs) {
      pairs.push_back({a, b});
    }
    doc.push_back({{"doi", t.doi}, {"figure_id", t.figure_id}, {"blocks", blocks}, {"duplicate_pairs", pairs}});
  }
  const auto text = doc.dump(1) + "\n";
  write_file_atomic(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

}  // namespace blotcheck
