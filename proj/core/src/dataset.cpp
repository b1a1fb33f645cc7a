#include "varprec/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace varprec::harness {

Matrix Matrix::gather_rows(std::span<const std::int64_t> idx) const {
  Matrix out(static_cast<std::int64_t>(idx.size()), cols);
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy_n(data.data() + idx[i] * cols, cols, out.data.data() + static_cast<std::int64_t>(i) * cols);
  return out;
}

Matrix Whitening::apply(const Matrix& m) const {
  if (m.cols != static_cast<std::int64_t>(mean.size()))
    throw std::invalid_argument("Whitening::apply: column count mismatch");
  Matrix out = m;
  for (std::int64_t r = 0; r < m.rows; ++r)
    for (std::int64_t c = 0; c < m.cols; ++c)
      out.at(r, c) = (m.at(r, c) - mean[static_cast<std::size_t>(c)]) / scale[static_cast<std::size_t>(c)];
  return out;
}

Matrix Whitening::invert(const Matrix& m) const {
  if (m.cols != static_cast<std::int64_t>(mean.size()))
    throw std::invalid_argument("Whitening::invert: column count mismatch");
  Matrix out = m;
  for (std::int64_t r = 0; r < m.rows; ++r)
    for (std::int64_t c = 0; c < m.cols; ++c)
      out.at(r, c) = m.at(r, c) * scale[static_cast<std::size_t>(c)] + mean[static_cast<std::size_t>(c)];
  return out;
}

bool Whitening::is_identity() const {
  for (double m : mean)
    if (m != 0.0) return false;
  for (double s : scale)
    if (s != 1.0) return false;
  return true;
}

Whitening fit_whitening(const Matrix& m, std::span<const std::int64_t> rows) {
  if (rows.empty()) throw std::invalid_argument("fit_whitening: empty row set");
  Whitening w;
  w.mean.assign(static_cast<std::size_t>(m.cols), 0.0);
  w.scale.assign(static_cast<std::size_t>(m.cols), 1.0);
  const double n = static_cast<double>(rows.size());
  for (std::int64_t c = 0; c < m.cols; ++c) {
    double mu = 0.0;
    for (auto r : rows) mu += m.at(r, c);
    mu /= n;
    double var = 0.0;
    for (auto r : rows) {
      const double d = m.at(r, c) - mu;
      var += d * d;
    }
    var /= n;
    w.mean[static_cast<std::size_t>(c)] = mu;
    // constant columns keep scale 1
    w.scale[static_cast<std::size_t>(c)] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  return w;
}

Whitening identity_whitening(std::int64_t cols) {
  Whitening w;
  w.mean.assign(static_cast<std::size_t>(cols), 0.0);
  w.scale.assign(static_cast<std::size_t>(cols), 1.0);
  return w;
}

double toy_true_mean(double x) { return x * std::sin(x); }
double toy_true_std(double x) { return std::fabs(0.3 * (1.0 + x)); }

Dataset toy_generate(int n_train, int n_val, int n_grid, Rng& rng) {
  if (n_train < 1) throw std::invalid_argument("toy_generate: need at least one training point");
  const std::int64_t n = n_train + n_val;
  Matrix x(n, 1), y(n, 1);
  for (std::int64_t i = 0; i < n; ++i) {
    const double xi = rng.uniform(0.0, 10.0);
    x.at(i, 0) = xi;
    y.at(i, 0) = toy_true_mean(xi) + toy_true_std(xi) * rng.normal();
  }
  Dataset ds;
  ds.provenance = "toy";
  ds.train_rows.resize(static_cast<std::size_t>(n_train));
  for (int i = 0; i < n_train; ++i) ds.train_rows[static_cast<std::size_t>(i)] = i;
  ds.val_rows.resize(static_cast<std::size_t>(n_val));
  for (int i = 0; i < n_val; ++i) ds.val_rows[static_cast<std::size_t>(i)] = n_train + i;
  ds.wx = fit_whitening(x, ds.train_rows);
  ds.wy = fit_whitening(y, ds.train_rows);
  ds.x = ds.wx.apply(x);
  ds.y = ds.wy.apply(y);
  ToyTruth truth;
  truth.grid_x.resize(static_cast<std::size_t>(n_grid));
  truth.true_mean.resize(static_cast<std::size_t>(n_grid));
  truth.true_std.resize(static_cast<std::size_t>(n_grid));
  for (int i = 0; i < n_grid; ++i) {
    const double gx = -4.0 + 18.0 * static_cast<double>(i) / static_cast<double>(n_grid - 1);
    truth.grid_x[static_cast<std::size_t>(i)] = gx;
    truth.true_mean[static_cast<std::size_t>(i)] = toy_true_mean(gx);
    truth.true_std[static_cast<std::size_t>(i)] = toy_true_std(gx);
  }
  ds.truth = std::move(truth);
  return ds;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

void random_split(std::int64_t n, double val_fraction, Rng& rng, std::vector<std::int64_t>& train,
                  std::vector<std::int64_t>& val) {
  if (val_fraction < 0.0 || val_fraction >= 1.0)
    throw std::invalid_argument("validation fraction must lie in [0, 1)");
  std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  rng.shuffle(idx);
  const std::int64_t n_val = static_cast<std::int64_t>(std::llround(val_fraction * static_cast<double>(n)));
  val.assign(idx.begin(), idx.begin() + n_val);
  train.assign(idx.begin() + n_val, idx.end());
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  if (train.empty()) throw std::invalid_argument("empty training split");
}

}  // namespace

Dataset load_csv(const std::string& path, const std::vector<std::string>& target_columns,
                 double val_fraction, Rng& rng) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_csv: '" + path + "' is empty");
  const auto header = split_csv_line(line);
  std::vector<std::string> names;
  names.reserve(header.size());
  for (const auto& h : header) names.push_back(trim(h));

  std::vector<std::int64_t> target_idx;
  for (const auto& t : target_columns) {
    auto it = std::find(names.begin(), names.end(), t);
    if (it == names.end())
      throw std::runtime_error("load_csv: target column '" + t + "' not found in '" + path + "'");
    target_idx.push_back(it - names.begin());
  }
  if (target_idx.empty()) throw std::runtime_error("load_csv: no target columns given");

  std::vector<std::vector<double>> rows;
  std::int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != names.size())
      throw std::runtime_error("load_csv: row " + std::to_string(line_no) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(names.size()));
    std::vector<double> vals(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      try {
        std::size_t pos = 0;
        vals[c] = std::stod(trim(cells[c]), &pos);
        if (pos != trim(cells[c]).size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw std::runtime_error("load_csv: non-numeric cell at row " + std::to_string(line_no) +
                                 ", column '" + names[c] + "'");
      }
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw std::runtime_error("load_csv: no data rows in '" + path + "'");

  const std::int64_t n = static_cast<std::int64_t>(rows.size());
  const std::int64_t d_y = static_cast<std::int64_t>(target_idx.size());
  const std::int64_t d_x = static_cast<std::int64_t>(names.size()) - d_y;
  Matrix x(n, d_x), y(n, d_y);
  for (std::int64_t r = 0; r < n; ++r) {
    std::int64_t cx = 0;
    for (std::size_t c = 0; c < names.size(); ++c) {
      const auto ti = std::find(target_idx.begin(), target_idx.end(), static_cast<std::int64_t>(c));
      if (ti != target_idx.end())
        y.at(r, ti - target_idx.begin()) = rows[static_cast<std::size_t>(r)][c];
      else
        x.at(r, cx++) = rows[static_cast<std::size_t>(r)][c];
    }
  }

  Dataset ds;
  ds.provenance = "csv";
  random_split(n, val_fraction, rng, ds.train_rows, ds.val_rows);
  ds.wx = fit_whitening(x, ds.train_rows);
  ds.wy = fit_whitening(y, ds.train_rows);
  ds.x = ds.wx.apply(x);
  ds.y = ds.wy.apply(y);
  return ds;
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("load_idx: truncated header in '" + path + "'");
  return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

Matrix pool_to_side(const Matrix& src, std::int64_t h, std::int64_t w, std::int64_t side) {
  Matrix out(src.rows, side * side);
  for (std::int64_t r = 0; r < src.rows; ++r) {
    for (std::int64_t i = 0; i < side; ++i)
      for (std::int64_t j = 0; j < side; ++j) {
        const std::int64_t r0 = i * h / side, r1 = std::max(r0 + 1, (i + 1) * h / side);
        const std::int64_t c0 = j * w / side, c1 = std::max(c0 + 1, (j + 1) * w / side);
        double acc = 0.0;
        for (std::int64_t rr = r0; rr < r1; ++rr)
          for (std::int64_t cc = c0; cc < c1; ++cc) acc += src.at(r, rr * w + cc);
        out.at(r, i * side + j) = acc / static_cast<double>((r1 - r0) * (c1 - c0));
      }
  }
  return out;
}

Dataset finish_image_dataset(Matrix&& pixels, double val_fraction, Rng& rng, std::string provenance) {
  Dataset ds;
  ds.provenance = std::move(provenance);
  random_split(pixels.rows, val_fraction, rng, ds.train_rows, ds.val_rows);
  ds.wx = identity_whitening(pixels.cols);
  ds.wy = identity_whitening(pixels.cols);
  ds.y = pixels;  // replicated-input targets
  ds.x = std::move(pixels);
  return ds;
}

}  // namespace

Dataset load_idx(const std::string& images_path, double val_fraction, Rng& rng, int side) {
  std::ifstream in(images_path, std::ios::binary);
  if (!in) throw std::runtime_error("load_idx: cannot open '" + images_path + "'");
  const std::uint32_t magic = read_be32(in, images_path);
  if (magic != 0x00000803u)
    throw std::runtime_error("load_idx: '" + images_path + "' is not an unsigned-byte rank-3 IDX file");
  const std::int64_t n = read_be32(in, images_path);
  const std::int64_t h = read_be32(in, images_path);
  const std::int64_t w = read_be32(in, images_path);
  Matrix pixels(n, h * w);
  std::vector<unsigned char> buf(static_cast<std::size_t>(h * w));
  for (std::int64_t i = 0; i < n; ++i) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw std::runtime_error("load_idx: truncated image data in '" + images_path + "'");
    for (std::size_t p = 0; p < buf.size(); ++p)
      pixels.data[static_cast<std::size_t>(i) * buf.size() + p] = static_cast<double>(buf[p]) / 255.0;
  }
  if (side > 0 && (side != h || side != w)) pixels = pool_to_side(pixels, h, w, side);
  return finish_image_dataset(std::move(pixels), val_fraction, rng, "idx");
}

Dataset load_image_csv_dir(const std::string& dir, double val_fraction, Rng& rng) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  if (files.empty()) throw std::runtime_error("load_image_csv_dir: no .csv files in '" + dir + "'");
  std::sort(files.begin(), files.end());
  std::vector<std::vector<double>> images;
  std::int64_t d = -1;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::vector<double> img;
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      for (const auto& cell : split_csv_line(line)) img.push_back(std::stod(trim(cell)));
    }
    if (d < 0) d = static_cast<std::int64_t>(img.size());
    if (static_cast<std::int64_t>(img.size()) != d)
      throw std::runtime_error("load_image_csv_dir: '" + f.string() + "' has " +
                               std::to_string(img.size()) + " pixels, expected " + std::to_string(d));
    images.push_back(std::move(img));
  }
  Matrix pixels(static_cast<std::int64_t>(images.size()), d);
  for (std::size_t i = 0; i < images.size(); ++i)
    std::copy(images[i].begin(), images[i].end(), pixels.data.begin() + static_cast<std::int64_t>(i) * d);
  return finish_image_dataset(std::move(pixels), val_fraction, rng, "csv");
}

namespace {

// 5x7 digit glyphs, row-major bit masks
constexpr std::uint8_t kGlyphs[10][7] = {
    {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e},  // 0
    {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e},  // 1
    {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f},  // 2
    {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e},  // 3
    {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02},  // 4
    {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e},  // 5
    {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e},  // 6
    {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},  // 7
    {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e},  // 8
    {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c},  // 9
};

double glyph_at(int digit, double u, double v) {
  // bilinear sample of the 5x7 bitmap; (u, v) in glyph pixel units
  auto texel = [&](int col, int row) -> double {
    if (col < 0 || col >= 5 || row < 0 || row >= 7) return 0.0;
    return (kGlyphs[digit][row] >> (4 - col)) & 1 ? 1.0 : 0.0;
  };
  const int c0 = static_cast<int>(std::floor(u)), r0 = static_cast<int>(std::floor(v));
  const double fu = u - c0, fv = v - r0;
  return texel(c0, r0) * (1 - fu) * (1 - fv) + texel(c0 + 1, r0) * fu * (1 - fv) +
         texel(c0, r0 + 1) * (1 - fu) * fv + texel(c0 + 1, r0 + 1) * fu * fv;
}

}  // namespace

Dataset synth_digits(int n, int side, double val_fraction, Rng& rng) {
  if (n < 2) throw std::invalid_argument("synth_digits: need at least two images");
  Matrix pixels(n, static_cast<std::int64_t>(side) * side);
  for (int i = 0; i < n; ++i) {
    const int digit = static_cast<int>(rng.uniform_int(10));
    const double scale = rng.uniform(0.45, 0.62);  // glyph pixels per image pixel
    const double ox = rng.uniform(-1.5, 1.5) + (side - 5.0 / scale) * 0.5;
    const double oy = rng.uniform(-1.5, 1.5) + (side - 7.0 / scale) * 0.5;
    const double contrast = rng.uniform(0.7, 1.0);
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c) {
        const double u = (c - ox) * scale;
        const double v = (r - oy) * scale;
        double val = contrast * glyph_at(digit, u, v) + 0.03 * rng.normal();
        pixels.at(i, r * side + c) = std::clamp(val, 0.0, 1.0);
      }
  }
  return finish_image_dataset(std::move(pixels), val_fraction, rng, "synth");
}

dists::PredictiveDist dewhiten_predictive(const dists::PredictiveDist& p,
                                          std::span<const double> scales,
                                          std::span<const double> means) {
  if (static_cast<std::int64_t>(scales.size()) != p.dims() || scales.size() != means.size())
    throw std::invalid_argument("dewhiten_predictive: scale/mean length must match dims");
  for (double s : scales)
    if (!(s > 0.0)) throw std::invalid_argument("dewhiten_predictive: scales must be positive");
  dists::PredictiveDist out = p;
  for (auto& comp : out.components)
    for (std::size_t k = 0; k < comp.size(); ++k) {
      auto& c = comp[k];
      if (c.family == dists::Component::Family::Normal) {
        c.a = scales[k] * c.a + means[k];
        c.b = scales[k] * scales[k] * c.b;
      } else {
        c.a = scales[k] * c.a + means[k];
        c.b = scales[k] * c.b;
      }
    }
  return out;
}

}  // namespace varprec::harness
