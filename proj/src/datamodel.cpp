#include "secs/datamodel.hpp"

#include "secs/error.hpp"
#include "secs/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace secs {
namespace {

constexpr const char* kModule = "datamodel";

struct Header {
  std::map<std::string, std::size_t, std::less<>> index;
  std::size_t width = 0;

  std::size_t at(std::string_view name) const { return index.find(name)->second; }
  bool has(std::string_view name) const { return index.find(name) != index.end(); }
};

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r')
    line.remove_suffix(1);
  return line;
}

Header parse_header(std::istream& in, const std::string& source,
                    const std::vector<std::string>& required,
                    const std::vector<std::string>& optional) {
  std::string line;
  if (!std::getline(in, line))
    throw SchemaError(kModule, source + ": empty file, expected a header row");
  std::string_view text = strip_cr(line);
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF")
    text.remove_prefix(3);
  Header h;
  const auto fields = split_fields(text);
  h.width = fields.size();
  for (std::size_t i = 0; i < fields.size(); ++i) {
    std::string name(fields[i]);
    const bool known =
        std::find(required.begin(), required.end(), name) != required.end() ||
        std::find(optional.begin(), optional.end(), name) != optional.end();
    if (!known)
      throw SchemaError(kModule, source + ": unexpected column '" + name + "'");
    if (!h.index.emplace(name, i).second)
      throw SchemaError(kModule, source + ": duplicate column '" + name + "'");
  }
  for (const auto& name : required)
    if (!h.has(name))
      throw SchemaError(kModule, source + ": missing column '" + name + "'");
  return h;
}

std::string row_ref(const std::string& source, std::size_t line_no) {
  return source + ":" + std::to_string(line_no);
}

// Appends `day` to a running per-series date cursor, enforcing consecutive
// no-leap days that start on Jan 1.
void check_continuity(std::optional<DayOfYear>& last, const DayOfYear& day,
                      const std::string& cell, const std::string& where) {
  if (!last) {
    if (day.doy != 1)
      throw ContinuityError(kModule, where + ": series for cell '" + cell +
                                         "' does not start on Jan 1 (" +
                                         format_iso_date(day) + ")");
  } else if (!(day == next_day(*last))) {
    throw ContinuityError(kModule, where + ": cell '" + cell + "' date " +
                                       format_iso_date(day) + " does not follow " +
                                       format_iso_date(*last) +
                                       " (gap or non-monotone dates)");
  }
  last = day;
}

void check_year_complete(const std::optional<DayOfYear>& last, const std::string& cell,
                         const std::string& source) {
  if (last && last->doy != kDaysPerYear)
    throw ContinuityError(kModule, source + ": series for cell '" + cell +
                                       "' ends mid-year at " + format_iso_date(*last));
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

struct WeatherAccum {
  CellId cell;
  int start_year = 0;
  std::optional<DayOfYear> last;
  std::vector<double> tmax, tmin, precip;
};

struct YieldAccum {
  std::string cell;
  int member = 0;
  int start_year = 0;
  std::optional<DayOfYear> last;
  std::vector<double> twso;
};

void write_yield_rows(std::ostream& out, const YieldSeries& s, const int* member) {
  for (Eigen::Index k = 0; k < s.n_days(); ++k) {
    const DayOfYear day{s.start_year + static_cast<int>(k / kDaysPerYear),
                        static_cast<int>(k % kDaysPerYear) + 1};
    out << s.cell.id << ',' << format_iso_date(day) << ',' << format_number(s.twso[k]);
    if (member)
      out << ',' << *member;
    out << '\n';
  }
}

std::vector<EnsembleYield> read_yield_rows(std::istream& in, const std::string& source,
                                          Monotonicity check) {
  const Header h = parse_header(in, source, {"cell_id", "date", "twso_kg_ha"}, {"member"});
  const bool has_member = h.has("member");
  std::map<std::pair<std::string, int>, YieldAccum> acc;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = strip_cr(line);
    if (text.empty())
      continue;
    const auto f = split_fields(text);
    const std::string where = row_ref(source, line_no);
    if (f.size() != h.width)
      throw SchemaError(kModule, where + ": expected " + std::to_string(h.width) +
                                     " fields, found " + std::to_string(f.size()));
    const std::string cell(f[h.at("cell_id")]);
    const auto date = parse_iso_date(f[h.at("date")]);
    if (!date)
      throw SchemaError(kModule, where + ": malformed date '" +
                                     std::string(f[h.at("date")]) + "'");
    const auto day = to_day_of_year(*date);
    if (!day)
      continue;
    int member = 0;
    if (has_member) {
      const double m = parse_number(f[h.at("member")], where);
      if (m < 0 || m != std::floor(m))
        throw SchemaError(kModule, where + ": member must be a nonnegative integer");
      member = static_cast<int>(m);
    }
    const double v = parse_number(f[h.at("twso_kg_ha")], where);
    if (!std::isfinite(v) || v < 0)
      throw BoundsError(kModule, where + ": twso_kg_ha must be finite and >= 0 (cell '" +
                                     cell + "', " + format_iso_date(*day) + ")");
    auto& a = acc[{cell, member}];
    if (a.twso.empty()) {
      a.cell = cell;
      a.member = member;
      a.start_year = day->year;
    }
    check_continuity(a.last, *day, cell, where);
    if (check == Monotonicity::enforce && day->doy != 1 && !a.twso.empty() &&
        v < a.twso.back())
      throw BoundsError(kModule, where + ": twso decreases within a year for cell '" +
                                     cell + "' on " + format_iso_date(*day));
    a.twso.push_back(v);
  }
  std::vector<EnsembleYield> out;
  out.reserve(acc.size());
  for (auto& [key, a] : acc) {
    check_year_complete(a.last, a.cell, source);
    EnsembleYield e;
    e.member_id = a.member;
    e.series.cell.id = a.cell;
    e.series.start_year = a.start_year;
    e.series.twso = to_vector(a.twso);
    out.push_back(std::move(e));
  }
  return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError(kModule, "cannot open '" + path.string() + "'");
  return in;
}

} // namespace

WeatherSeries WeatherSeries::year(int year_index) const {
  if (year_index < 0 || year_index >= n_years())
    throw DomainError(kModule, "year index " + std::to_string(year_index) +
                                   " outside series of " + std::to_string(n_years()) +
                                   " years");
  WeatherSeries w;
  w.cell = cell;
  w.start_year = start_year + year_index;
  const Eigen::Index off = static_cast<Eigen::Index>(year_index) * kDaysPerYear;
  w.tmax = tmax.segment(off, kDaysPerYear);
  w.tmin = tmin.segment(off, kDaysPerYear);
  w.precip = precip.segment(off, kDaysPerYear);
  return w;
}

Eigen::VectorXd YieldSeries::end_of_year() const {
  Eigen::VectorXd out(n_years());
  for (int y = 0; y < n_years(); ++y)
    out[y] = twso[static_cast<Eigen::Index>(y + 1) * kDaysPerYear - 1];
  return out;
}

void validate(const WeatherSeries& w) {
  const Eigen::Index n = w.tmax.size();
  if (w.tmin.size() != n || w.precip.size() != n || n == 0 || n % kDaysPerYear != 0)
    throw ShapeError(kModule, "weather series for cell '" + w.cell.id +
                                  "' must hold whole 365-day years with equal-length variables");
  for (Eigen::Index d = 0; d < n; ++d) {
    if (!std::isfinite(w.tmax[d]) || !std::isfinite(w.tmin[d]) || !std::isfinite(w.precip[d]))
      throw BoundsError(kModule, "non-finite weather value for cell '" + w.cell.id + "'");
    if (w.tmax[d] < w.tmin[d] || w.precip[d] < 0) {
      const DayOfYear day{w.start_year + static_cast<int>(d / kDaysPerYear),
                          static_cast<int>(d % kDaysPerYear) + 1};
      throw BoundsError(kModule, "cell '" + w.cell.id + "' on " + format_iso_date(day) +
                                     (w.precip[d] < 0 ? ": precip < 0" : ": tmax < tmin"));
    }
  }
}

void validate(const YieldSeries& y) {
  const Eigen::Index n = y.twso.size();
  if (n == 0 || n % kDaysPerYear != 0)
    throw ShapeError(kModule, "yield series for cell '" + y.cell.id +
                                  "' must hold whole 365-day years");
  for (Eigen::Index d = 0; d < n; ++d) {
    if (!std::isfinite(y.twso[d]) || y.twso[d] < 0)
      throw BoundsError(kModule, "negative or non-finite twso for cell '" + y.cell.id + "'");
    if (d % kDaysPerYear != 0 && y.twso[d] < y.twso[d - 1])
      throw BoundsError(kModule, "twso decreases within a year for cell '" + y.cell.id + "'");
  }
}

std::vector<WeatherSeries> read_weather_table(std::istream& in, const std::string& source) {
  const Header h = parse_header(
      in, source, {"cell_id", "lat", "lon", "date", "tmax_c", "tmin_c", "precip_mm"}, {});
  std::map<std::string, WeatherAccum> acc;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = strip_cr(line);
    if (text.empty())
      continue;
    const auto f = split_fields(text);
    const std::string where = row_ref(source, line_no);
    if (f.size() != h.width)
      throw SchemaError(kModule, where + ": expected " + std::to_string(h.width) +
                                     " fields, found " + std::to_string(f.size()));
    const std::string cell(f[h.at("cell_id")]);
    if (cell.empty())
      throw SchemaError(kModule, where + ": empty cell_id");
    const auto date = parse_iso_date(f[h.at("date")]);
    if (!date)
      throw SchemaError(kModule, where + ": malformed date '" +
                                     std::string(f[h.at("date")]) + "'");
    const auto day = to_day_of_year(*date);
    if (!day)
      continue; // Feb 29 is not part of the no-leap calendar
    const double lat = parse_number(f[h.at("lat")], where);
    const double lon = parse_number(f[h.at("lon")], where);
    const double tmax = parse_number(f[h.at("tmax_c")], where);
    const double tmin = parse_number(f[h.at("tmin_c")], where);
    const double precip = parse_number(f[h.at("precip_mm")], where);
    if (!(lat >= -90 && lat <= 90) || !(lon >= -180 && lon <= 180))
      throw BoundsError(kModule, where + ": coordinates out of range for cell '" + cell + "'");
    if (!std::isfinite(tmax) || !std::isfinite(tmin) || !std::isfinite(precip))
      throw BoundsError(kModule, where + ": non-finite value for cell '" + cell + "'");
    if (tmax < tmin)
      throw BoundsError(kModule, where + ": tmax < tmin for cell '" + cell + "' on " +
                                     format_iso_date(*day));
    if (precip < 0)
      throw BoundsError(kModule, where + ": precip < 0 for cell '" + cell + "' on " +
                                     format_iso_date(*day));
    auto& a = acc[cell];
    if (a.tmax.empty()) {
      a.cell = CellId{cell, lat, lon};
      a.start_year = day->year;
    } else if (a.cell.lat != lat || a.cell.lon != lon) {
      throw SchemaError(kModule, where + ": coordinates of cell '" + cell + "' change");
    }
    check_continuity(a.last, *day, cell, where);
    a.tmax.push_back(tmax);
    a.tmin.push_back(tmin);
    a.precip.push_back(precip);
  }
  std::vector<WeatherSeries> out;
  out.reserve(acc.size());
  for (auto& [id, a] : acc) {
    check_year_complete(a.last, id, source);
    WeatherSeries w;
    w.cell = a.cell;
    w.start_year = a.start_year;
    w.tmax = to_vector(a.tmax);
    w.tmin = to_vector(a.tmin);
    w.precip = to_vector(a.precip);
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<WeatherSeries> load_weather_table(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_weather_table(in, path.string());
}

void write_weather_table(std::ostream& out, std::span<const WeatherSeries> series) {
  out << "cell_id,lat,lon,date,tmax_c,tmin_c,precip_mm\n";
  for (const auto& w : series) {
    const std::string prefix =
        w.cell.id + ',' + format_number(w.cell.lat) + ',' + format_number(w.cell.lon) + ',';
    for (Eigen::Index k = 0; k < w.n_days(); ++k) {
      const DayOfYear day{w.start_year + static_cast<int>(k / kDaysPerYear),
                          static_cast<int>(k % kDaysPerYear) + 1};
      out << prefix << format_iso_date(day) << ',' << format_number(w.tmax[k]) << ','
          << format_number(w.tmin[k]) << ',' << format_number(w.precip[k]) << '\n';
    }
  }
}

std::vector<YieldSeries> read_yield_table(std::istream& in, const std::string& source,
                                          Monotonicity check) {
  auto members = read_yield_rows(in, source, check);
  std::vector<YieldSeries> out;
  out.reserve(members.size());
  for (auto& m : members) {
    if (m.member_id != 0)
      throw SchemaError(kModule, source + ": ensemble member " + std::to_string(m.member_id) +
                                     " found where a single-member table was expected");
    out.push_back(std::move(m.series));
  }
  return out;
}

std::vector<YieldSeries> load_yield_table(const std::filesystem::path& path, Monotonicity check) {
  auto in = open_input(path);
  return read_yield_table(in, path.string(), check);
}

std::vector<EnsembleYield> read_ensemble_table(std::istream& in, const std::string& source,
                                             Monotonicity check) {
  return read_yield_rows(in, source, check);
}

std::vector<EnsembleYield> load_ensemble_table(const std::filesystem::path& path, Monotonicity check) {
  auto in = open_input(path);
  return read_ensemble_table(in, path.string(), check);
}

void write_yield_table(std::ostream& out, std::span<const YieldSeries> series) {
  out << "cell_id,date,twso_kg_ha\n";
  for (const auto& s : series)
    write_yield_rows(out, s, nullptr);
}

void write_ensemble_table(std::ostream& out, std::span<const EnsembleYield> members) {
  out << "cell_id,date,twso_kg_ha,member\n";
  for (const auto& m : members)
    write_yield_rows(out, m.series, &m.member_id);
}

std::string AlignmentReport::summary() const {
  std::ostringstream ss;
  ss << (aligned ? "aligned" : "not aligned") << ": " << in_both.size() << " shared cells";
  if (!weather_only.empty())
    ss << ", " << weather_only.size() << " weather-only (first '" << weather_only.front() << "')";
  if (!yield_only.empty())
    ss << ", " << yield_only.size() << " yield-only (first '" << yield_only.front() << "')";
  for (const auto& m : year_mismatches)
    ss << ", cell '" << m.cell_id << "' weather " << m.weather_start << "-" << m.weather_end
       << " vs yield " << m.yield_start << "-" << m.yield_end;
  return ss.str();
}

AlignmentReport validate_alignment(std::span<const WeatherSeries> weather,
                                   std::span<const YieldSeries> yields) {
  std::map<std::string, const WeatherSeries*> w;
  std::map<std::string, const YieldSeries*> y;
  for (const auto& s : weather)
    w.emplace(s.cell.id, &s);
  for (const auto& s : yields)
    y.emplace(s.cell.id, &s);
  AlignmentReport r;
  for (const auto& [id, ws] : w) {
    auto it = y.find(id);
    if (it == y.end()) {
      r.weather_only.push_back(id);
      continue;
    }
    r.in_both.push_back(id);
    const YieldSeries* ys = it->second;
    if (ws->start_year != ys->start_year || ws->end_year() != ys->end_year())
      r.year_mismatches.push_back(
          {id, ws->start_year, ws->end_year(), ys->start_year, ys->end_year()});
  }
  for (const auto& [id, ys] : y)
    if (!w.count(id))
      r.yield_only.push_back(id);
  r.aligned = r.weather_only.empty() && r.yield_only.empty() && r.year_mismatches.empty();
  return r;
}

} // namespace secs
