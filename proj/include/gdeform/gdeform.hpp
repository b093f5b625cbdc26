#pragma once

#include "gdeform/chartcore.hpp"
#include "gdeform/catalog.hpp"
#include "gdeform/gaussmap.hpp"
#include "gdeform/defdata.hpp"
#include "gdeform/triplefield.hpp"
#include "gdeform/reconstruct.hpp"
#include "gdeform/pipeline.hpp"
