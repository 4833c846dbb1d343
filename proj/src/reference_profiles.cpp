#include "kbforge/kb.hpp"

namespace kbforge {

namespace {

FeatureProfile range(Feature f, double min, double median, double max) {
  return {f, min, median, max};
}

FeatureProfile exactly(Feature f, double v) { return {f, v, v, v}; }

}  // namespace

std::vector<AttackProfile> reference_profiles() {
  using F = Feature;
  std::vector<AttackProfile> out;

  out.push_back({AttackLabel::IcmpFlood,
                 kDefaultTopK,
                 {
                     range(F::Min, 42.0, 42.0, 992.72),
                     exactly(F::ProtocolType, 1.0),
                     range(F::Magnitude, 9.16, 9.16, 59.79),
                     exactly(F::Icmp, 1.0),
                     range(F::Avg, 42.0, 42.0, 1885.5),
                     range(F::TotSum, 42.0, 441.0, 19764.8),
                     exactly(F::Max, 42.0),
                     exactly(F::TotSize, 42.0),
                     range(F::Iat, 0.0, 83128994.35, 100179851.34),
                 }});

  // Header Length is ranked fourth but has no published median, so it is
  // left out rather than guessed.
  out.push_back({AttackLabel::UdpFlood,
                 kDefaultTopK,
                 {
                     range(F::Iat, 4.3e-6, 83102993.46, 99748506.4),
                     range(F::Rate, 6.0, 7480.80, 1569352.1),
                     range(F::Srate, 6.0, 7480.80, 1569352.1),
                     exactly(F::Udp, 1.0),
                     range(F::ProtocolType, 4.84, 17.0, 17.0),
                     range(F::Magnitude, 9.97, 10.0, 41.16),
                     range(F::Min, 48.74, 50.0, 468.37),
                     range(F::TotSize, 49.88, 50.0, 1075.46),
                     range(F::TotSum, 150.0, 525.0, 11576.45),
                 }});

  out.push_back({AttackLabel::TcpFlood,
                 kDefaultTopK,
                 {
                     range(F::Iat, 1.3e-7, 83068279.06, 99691821.6),
                     range(F::SynCount, 0.0, 0.0, 2.25),
                     exactly(F::SynFlagNumber, 0.0),
                     range(F::FlowDuration, 0.0, 0.0, 1270.91),
                     range(F::FinCount, 0.0, 0.0, 0.45),
                     exactly(F::ProtocolType, 6.0),
                     exactly(F::PshFlagNumber, 0.0),
                     exactly(F::Tcp, 1.0),
                     exactly(F::UrgCount, 0.0),
                     exactly(F::AckFlagNumber, 0.0),
                 }});

  out.push_back({AttackLabel::PshAckFlood,
                 kDefaultTopK,
                 {
                     exactly(F::PshFlagNumber, 1.0),
                     range(F::AckFlagNumber, 0.0, 1.0, 1.0),
                     range(F::UrgCount, 0.0, 1.0, 214.22),
                     range(F::RstCount, 0.0, 1.0, 472.02),
                     range(F::Iat, 1.5e-5, 83318215.97, 99998229.54),
                     range(F::TotSize, 53.76, 54.0, 689.69),
                     range(F::Magnitude, 10.34, 10.39, 31.17),
                     range(F::HeaderLength, 51.3, 54.0, 1601755.99),
                     range(F::Avg, 53.34, 54.0, 1079.47),
                     range(F::Max, 53.76, 54.0, 3022.11),
                 }});
  return out;
}

}  // namespace kbforge
