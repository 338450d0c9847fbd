#pragma once

// Fixed seeds for the random-model identity checks.

#include <array>
#include <cstdint>

namespace drope {

inline constexpr std::array<std::uint32_t, 100> kIdentitySeeds{
    1821027516u, 1339303412u, 479729899u, 227973994u, 1848941350u, 215147264u, 557026500u, 890071649u,
    1097901633u, 2011977199u, 1976844747u, 332046979u, 1239539927u, 863251453u, 1292635013u, 1449723075u,
    41883166u, 1655646108u, 319271202u, 1592304077u, 1339770428u, 284478080u, 96954819u, 847368753u,
    826845295u, 1974431665u, 273811616u, 1220641262u, 1164600369u, 1011815636u, 1654487064u, 1175845233u,
    523274071u, 264917066u, 465028190u, 602959749u, 1402564067u, 1247845725u, 1537644421u, 1510956918u,
    1546643817u, 2109753871u, 431653767u, 85309798u, 724448778u, 191181501u, 1361864431u, 686468752u,
    1057204492u, 669355160u, 600326793u, 1943075519u, 316803421u, 976981873u, 2123442101u, 359654881u,
    1183718297u, 847556192u, 896304182u, 1480001693u, 558958246u, 297043354u, 644168490u, 77191273u,
    1551708676u, 1174480552u, 1837163578u, 353428147u, 2087025585u, 1050436777u, 1318220684u, 748655776u,
    1459450871u, 1829428631u, 325620790u, 75201626u, 1725745267u, 1214843658u, 820535908u, 1181595492u,
    1093972766u, 445709394u, 529844097u, 1853434874u, 954100030u, 618949948u, 247715591u, 992663406u,
    1584277754u, 1065237565u, 454491284u, 548520479u, 202079042u, 639811806u, 1401579113u, 410143801u,
    877837870u, 1575957888u, 512556891u, 805313273u,
};

}  // namespace drope
