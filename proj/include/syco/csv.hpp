#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace syco {

// Fixed %.17g formatting so repeated runs emit byte-identical files.
std::string fmt_double(double v);

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& cells);

 private:
  std::ofstream out_;
  std::size_t n_cols_ = 0;
};

}  // namespace syco
