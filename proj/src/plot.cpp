#include "sensi/plot.hpp"

#include <algorithm>
#include <sstream>

namespace sensi {

std::string timeline_csv(const std::vector<TimelinePoint>& timeline) {
    std::ostringstream out;
    out << "turn,item_id,phi\n";
    for (const auto& p : timeline) {
        out << p.turn_index << ',';
        if (p.item_id) out << *p.item_id;
        out << ',' << p.phi << '\n';
    }
    return out.str();
}

namespace {

const char* kItemColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

}  // namespace

std::string timeline_svg(const std::vector<TimelinePoint>& timeline, int threshold) {
    constexpr int width = 640, height = 320, margin = 40;
    const int max_turn = timeline.empty() ? 1 : std::max(1, timeline.back().turn_index);
    auto x = [&](int turn) { return margin + (width - 2 * margin) * turn / max_turn; };
    auto y = [&](int phi) { return height - margin - (height - 2 * margin) * phi / 10; };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << y(0) << "\" x2=\"" << width - margin << "\" y2=\"" << y(0)
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << y(0) << "\" x2=\"" << margin << "\" y2=\"" << y(10)
        << "\" stroke=\"black\"/>\n";
    for (int v = 0; v <= 10; v += 2)
        out << "<text x=\"" << margin - 18 << "\" y=\"" << y(v) + 4 << "\">" << v << "</text>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"" << height - 8 << "\">turn</text>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << y(threshold) << "\" x2=\"" << width - margin << "\" y2=\""
        << y(threshold) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";

    // One polyline per item, in the order items first appear.
    std::vector<std::int64_t> items;
    for (const auto& p : timeline)
        if (p.item_id && std::find(items.begin(), items.end(), *p.item_id) == items.end()) items.push_back(*p.item_id);
    for (std::size_t i = 0; i < items.size(); ++i) {
        const char* color = kItemColors[i % std::size(kItemColors)];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
        for (const auto& p : timeline)
            if (p.item_id == items[i]) out << x(p.turn_index) << ',' << y(p.phi) << ' ';
        out << "\"/>\n";
        for (const auto& p : timeline) {
            if (p.item_id != items[i] || p.state != ItemState::Completed) continue;
            out << "<circle cx=\"" << x(p.turn_index) << "\" cy=\"" << y(p.phi) << "\" r=\"4\" fill=\"" << color
                << "\"><title>item " << items[i] << " completed at turn " << p.turn_index << "</title></circle>\n";
        }
        out << "<text x=\"" << width - margin + 4 << "\" y=\"" << margin + 14 * static_cast<int>(i) << "\" fill=\""
            << color << "\">item " << items[i] << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace sensi
