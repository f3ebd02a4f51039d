#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

namespace ssfl {

// One row per (round, client). Deterministic columns only; wall-clock times
// go to a separate timings file so replayed runs produce byte-identical
// metrics CSVs.
struct MetricsRecord {
  int round = 0;
  int client = 0;
  double loss_s = 0.0;
  double loss_u = 0.0;
  double loss_lc = 0.0;
  double loss_gc = 0.0;
  double loss_total = 0.0;
  double accuracy = 0.0;
  double f_p = 0.0;
  double g_p = 0.0;
  double mu_hat = 0.0;
  double sigma2_hat = 0.0;
  double mean_lambda = 0.0;
  std::uint64_t uplink_bytes = 0;
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline const char* metrics_header() {
  return "round,client,loss_s,loss_u,loss_lc,loss_gc,loss_total,accuracy,"
         "f_p,g_p,mu_hat,sigma2_hat,mean_lambda,uplink_bytes";
}

class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path) : out_(path, std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot open metrics file: " + path);
    out_ << metrics_header() << "\n";
  }

  void append(const MetricsRecord& r) {
    out_ << r.round << ',' << r.client << ',' << format_double(r.loss_s) << ','
         << format_double(r.loss_u) << ',' << format_double(r.loss_lc) << ','
         << format_double(r.loss_gc) << ',' << format_double(r.loss_total) << ','
         << format_double(r.accuracy) << ',' << format_double(r.f_p) << ','
         << format_double(r.g_p) << ',' << format_double(r.mu_hat) << ','
         << format_double(r.sigma2_hat) << ',' << format_double(r.mean_lambda) << ','
         << r.uplink_bytes << "\n";
  }

  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

class TimingsWriter {
 public:
  explicit TimingsWriter(const std::string& path) : out_(path, std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot open timings file: " + path);
    out_ << "round,client,wall_ms\n";
  }
  void append(int round, int client, double wall_ms) {
    out_ << round << ',' << client << ',' << format_double(wall_ms) << "\n";
  }

 private:
  std::ofstream out_;
};

}  // namespace ssfl
