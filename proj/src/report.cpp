#include <chrono>
#include <ctime>
#include <sstream>

#include <spdlog/fmt/fmt.h>

#include "blotcheck/error.hpp"
#include "blotcheck/runner.hpp"

namespace blotcheck {

namespace {

std::string html_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Panel file names use the figure's position in per_figure, so odd DOI characters never reach the filesystem.
std::map<FigureKey, std::size_t> figure_positions(const DetectionReport& report) {
  std::map<FigureKey, std::size_t> pos;
  for (std::size_t i = 0; i < report.per_figure.size(); ++i) {
    pos.emplace(report.per_figure[i].figure, i);
  }
  return pos;
}

std::string panel_file(std::size_t figure_pos, int k) {
  return "panels/fig" + std::to_string(figure_pos) + "_p" + std::to_string(k) + ".png";
}

}  // namespace

nlohmann::json report_json(const DetectionReport& report, const std::string& created_utc) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : report.per_pair) {
    pairs.push_back({{"doi", p.figure.doi},
                     {"figure_id", p.figure.figure_id},
                     {"k", p.k},
                     {"k2", p.k2},
                     {"probability", p.probability},
                     {"verdict", p.verdict}});
  }
  nlohmann::json figures = nlohmann::json::array();
  for (const auto& f : report.per_figure) {
    figures.push_back({{"doi", f.figure.doi},
                       {"figure_id", f.figure.figure_id},
                       {"verdict", f.verdict},
                       {"max_probability", f.max_probability}});
  }
  nlohmann::json summary = nullptr;
  if (report.summary) {
    const auto& s = *report.summary;
    summary = {{"pair_accuracy", s.pair_accuracy},
               {"figure_accuracy", s.figure_accuracy},
               {"precision", s.precision},
               {"recall", s.recall},
               {"tp", s.tp},
               {"fp", s.fp},
               {"tn", s.tn},
               {"fn", s.fn}};
  }
  return {{"version", 1},
          {"created_utc", created_utc},
          {"per_pair", pairs},
          {"per_figure", figures},
          {"summary", summary}};
}

std::string report_html(const DetectionReport& report) {
  const auto pos = figure_positions(report);
  std::ostringstream out;
  out << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>blotcheck report</title>\n"
      << "<style>body{font-family:sans-serif}section.pair{margin:1em 0;padding:.5em;border:1px solid #ccc}"
      << "section.pair img{height:128px;image-rendering:pixelated;margin-right:1em}</style></head><body>\n"
      << "<h1>Duplicate panel report</h1>\n";
  if (report.summary) {
    const auto& s = *report.summary;
    out << fmt::format("<p>pair accuracy {:.4f}, figure accuracy {:.4f}, precision {:.4f}, recall {:.4f} "
                       "(tp {}, fp {}, tn {}, fn {})</p>\n",
                       s.pair_accuracy, s.figure_accuracy, s.precision, s.recall, s.tp, s.fp, s.tn, s.fn);
  }
  bool any = false;
  for (const auto& p : report.per_pair) {
    if (!p.verdict) continue;
    any = true;
    const auto fig = pos.count(p.figure) ? pos.at(p.figure) : 0;
    out << "<section class=\"pair\">\n<h2>" << html_escape(p.figure.doi) << " figure "
        << html_escape(p.figure.figure_id) << ": panels " << p.k << " and " << p.k2 << "</h2>\n"
        << fmt::format("<p>probability {:.4f}</p>\n", p.probability);
    for (int k : {p.k, p.k2}) {
      if (report.panel_images.count({p.figure, k})) {
        out << "<img src=\"" << panel_file(fig, k) << "\" alt=\"panel " << k << "\">";
      }
    }
    out << "\n</section>\n";
  }
  if (!any) {
    out << "<p>no findings</p>\n";
  }
  out << "</body></html>\n";
  return out.str();
}

void emit_report(const DetectionReport& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "panels", ec);
  if (ec) {
    throw Error(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());
  }
  const auto pos = figure_positions(report);
  for (const auto& [key, img] : report.panel_images) {
    const auto it = pos.find(key.figure);
    if (it == pos.end()) continue;
    write_png(img, out_dir / panel_file(it->second, key.panel_index));
  }
  const std::string json = report_json(report, utc_now()).dump(2) + "\n";
  const std::string html = report_html(report);
  write_file_atomic(out_dir / "report.json", std::span(reinterpret_cast<const std::uint8_t*>(json.data()), json.size()));
  write_file_atomic(out_dir / "report.html", std::span(reinterpret_cast<const std::uint8_t*>(html.data()), html.size()));
}

}  // namespace blotcheck
