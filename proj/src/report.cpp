// SPDX-License-Identifier: MIT
#include "cecr/report.hpp"

#include "cecr/certify.hpp"
#include "cecr/errors.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>

namespace cecr
{

namespace
{

constexpr const char* csv_header =
  "h,N_elem,h_max,Gamma_h,A_h,d_h,rho_patch,eps_h_star,C_eps_diag,C_eps_rigorous,C_eps_cert,"
  "sigma,sigma_opt,eps_h_opt,k,mu_sigma_minus_sigma,L_mu_sigma,L_star,L_gamma,L_opt,U,"
  "admissible,confinement_ok";

std::vector<std::string> split_csv(const std::string& line)
{
  std::vector<std::string> out;
  std::string cur;
  for (char c : line)
  {
    if (c == ',')
    {
      out.push_back(cur);
      cur.clear();
    }
    else if (c != '\r')
      cur += c;
  }
  out.push_back(cur);
  return out;
}

double field(const std::string& s, int line)
{
  try
  {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size())
      return v;
  }
  catch (const std::exception&)
  {
  }
  throw InputError(fmt::format("enclosure CSV line {}: bad number '{}'", line, s));
}

std::optional<double> optional_field(const std::string& s, int line)
{
  if (s.empty())
    return std::nullopt;
  return field(s, line);
}

std::string fixed4(std::optional<double> v) { return v ? fmt::format("{:.4f}", *v) : "-"; }

} // namespace

double EnclosureRow::best_lower() const
{
  double b = L;
  if (L_opt)
    b = std::max(b, *L_opt);
  if (L_gamma)
    b = std::max(b, *L_gamma);
  return b;
}

std::vector<EnclosureRow> read_enclosure_csv(std::istream& is)
{
  std::string line;
  if (!std::getline(is, line))
    throw InputError("enclosure CSV is empty");
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
  if (line != csv_header)
    throw InputError("enclosure CSV has an unexpected header");
  std::vector<EnclosureRow> rows;
  int n = 1;
  while (std::getline(is, line))
  {
    ++n;
    if (line.empty() || line == "\r")
      continue;
    const auto f = split_csv(line);
    if (f.size() != 23)
      throw InputError(fmt::format("enclosure CSV line {}: expected 23 fields", n));
    EnclosureRow r;
    r.h = field(f[0], n);
    r.num_elements = static_cast<int>(field(f[1], n));
    r.h_max = field(f[2], n);
    r.Gamma_h = field(f[3], n);
    r.A_h = field(f[4], n);
    r.d_h = field(f[5], n);
    r.rho_patch = field(f[6], n);
    r.eps_h = field(f[7], n);
    r.C_eps_diag = field(f[8], n);
    r.C_eps_rigorous = optional_field(f[9], n);
    r.C_eps_cert = field(f[10], n);
    r.sigma = field(f[11], n);
    r.sigma_opt = field(f[12], n);
    r.eps_h_opt = field(f[13], n);
    r.k = static_cast<int>(field(f[14], n));
    r.mu_sigma_minus_sigma = field(f[15], n);
    r.L_mu_sigma = field(f[16], n);
    r.L = field(f[17], n);
    r.L_gamma = optional_field(f[18], n);
    r.L_opt = optional_field(f[19], n);
    r.U = field(f[20], n);
    r.admissible = field(f[21], n) != 0.0;
    r.confinement_ok = field(f[22], n) != 0.0;
    rows.push_back(r);
  }
  return rows;
}

void write_enclosure_markdown(std::ostream& os, const std::vector<EnclosureRow>& rows)
{
  os << "| h | N | h_max | Gamma_h | A_h | eps_h* | C_eps | k | mu-sigma | L^{mu,sigma} | L* | "
        "L_gamma | L_opt | U |\n";
  os << "|---|---|---|---|---|---|---|---|---|---|---|---|---|---|\n";
  for (const EnclosureRow& r : rows)
    fmt::print(os,
               "| {} | {} | {:.4f} | {:.4g} | {:.4g} | {:.4g} | {:.4f} | {} | {:.4f} | {:.4f} | "
               "{:.4f} | {} | {} | {:.4f} |\n",
               r.h, r.num_elements, r.h_max, r.Gamma_h, r.A_h, r.eps_h, r.C_eps_cert, r.k,
               r.mu_sigma_minus_sigma, r.L_mu_sigma, r.L, fixed4(r.L_gamma), fixed4(r.L_opt),
               r.U);
}

std::vector<ConvergencePoint> convergence_table(const std::vector<EnclosureRow>& rows,
                                                std::optional<double> lambda1_reference)
{
  std::vector<ConvergencePoint> pts;
  for (const EnclosureRow& r : rows)
  {
    if (r.k != 1)
      continue;
    ConvergencePoint p;
    p.h = r.h;
    p.h_max = r.h_max;
    const double target = lambda1_reference.value_or(r.U);
    p.gap_rough = target - r.L;
    if (r.L_opt)
      p.gap_opt = target - *r.L_opt;
    if (r.L_gamma)
      p.gap_gamma = target - *r.L_gamma;
    p.width = r.U - r.best_lower();
    pts.push_back(p);
  }
  std::sort(pts.begin(), pts.end(),
            [](const ConvergencePoint& a, const ConvergencePoint& b) { return a.h > b.h; });
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
  {
    if (!(pts[i].h_max > pts[i + 1].h_max))
      continue;
    const std::vector<double> hs{pts[i].h_max, pts[i + 1].h_max};
    pts[i + 1].eoc_rough = eoc({pts[i].gap_rough, pts[i + 1].gap_rough}, hs)[0];
    if (pts[i].gap_opt && pts[i + 1].gap_opt)
      pts[i + 1].eoc_opt = eoc({*pts[i].gap_opt, *pts[i + 1].gap_opt}, hs)[0];
  }
  return pts;
}

void write_convergence_csv(std::ostream& os, const std::vector<ConvergencePoint>& pts)
{
  auto num = [](std::optional<double> v) { return v ? fmt::format("{:.10g}", *v) : ""; };
  os << "h,h_max,gap_rough,gap_opt,gap_gamma,width,eoc_rough,eoc_opt\n";
  for (const ConvergencePoint& p : pts)
    fmt::print(os, "{},{},{},{},{},{},{},{}\n", num(p.h), num(p.h_max), num(p.gap_rough),
               num(p.gap_opt), num(p.gap_gamma), num(p.width), num(p.eoc_rough),
               num(p.eoc_opt));
}

void write_separation_csv(std::ostream& os, const std::vector<EnclosureRow>& rows)
{
  std::map<double, std::vector<const EnclosureRow*>, std::greater<>> by_level;
  for (const EnclosureRow& r : rows)
    by_level[r.h].push_back(&r);
  os << "h,k,separated,gap\n";
  for (auto& [h, rs] : by_level)
  {
    std::sort(rs.begin(), rs.end(),
              [](const EnclosureRow* a, const EnclosureRow* b) { return a->k < b->k; });
    std::vector<double> lo, up;
    for (const EnclosureRow* r : rs)
    {
      lo.push_back(r->best_lower());
      up.push_back(r->U);
    }
    for (const Separation& s : spectral_separation(lo, up))
      fmt::print(os, "{:.10g},{},{},{}\n", h, s.k, s.separated ? 1 : 0,
                 s.separated ? fmt::format("{:.10g}", s.gap) : "");
  }
}

void render_report(const std::string& dir, std::optional<double> lambda1_reference)
{
  namespace fs = std::filesystem;
  const fs::path base(dir);
  std::ifstream in(base / "enclosures.csv");
  if (!in)
    throw InputError(fmt::format("cannot open {}", (base / "enclosures.csv").string()));
  const std::vector<EnclosureRow> rows = read_enclosure_csv(in);
  auto open = [&](const char* name)
  {
    std::ofstream os(base / name);
    if (!os)
      throw InputError(fmt::format("cannot write {}", (base / name).string()));
    return os;
  };
  {
    auto os = open("enclosures.md");
    write_enclosure_markdown(os, rows);
  }
  {
    auto os = open("convergence.csv");
    write_convergence_csv(os, convergence_table(rows, lambda1_reference));
  }
  {
    auto os = open("separation.csv");
    write_separation_csv(os, rows);
  }
}

} // namespace cecr
