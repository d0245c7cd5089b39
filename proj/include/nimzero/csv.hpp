#pragma once

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nimzero {

// Line-buffered CSV writer; flushes each row so partial runs stay readable.
class CsvWriter {
 public:
  CsvWriter() = default;
  CsvWriter(const std::string& path, const std::vector<std::string>& header,
            bool append = false) {
    open(path, header, append);
  }

  void open(const std::string& path, const std::vector<std::string>& header,
            bool append = false) {
    const bool write_header = !append || !std::ifstream(path).good();
    out_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
    path_ = path;
    if (write_header) write_row(header);
  }

  bool is_open() const { return out_.is_open(); }

  void row(const std::vector<std::string>& cells) { write_row(cells); }

  static std::string num(double value, int precision = 6) {
    std::ostringstream ss;
    ss.precision(precision);
    ss << value;
    return ss.str();
  }

 private:
  void write_row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
    out_.flush();
    if (!out_) throw std::runtime_error("write failed on " + path_);
  }

  std::ofstream out_;
  std::string path_;
};

}  // namespace nimzero
