//! Bid-profile files: JSON objects keyed by resource id, with per-slot
//! prices that must match ladder candidates.

use std::collections::BTreeMap;
use std::path::Path;

use tsodso::model::{
    slots_for, BidSlot, MarketCase, ResourceRef, Scheme, StrategyProfile,
};

fn slot_name(slot: BidSlot) -> &'static str {
    match slot {
        BidSlot::Dam => "dam",
        BidSlot::AsmUp => "asm-up",
        BidSlot::AsmDown => "asm-down",
        BidSlot::AsmCurtail => "asm-curtail",
        BidSlot::DistUp => "dist-up",
        BidSlot::DistDown => "dist-down",
        BidSlot::DistCurtail => "dist-curtail",
        BidSlot::TransUp => "trans-up",
        BidSlot::TransDown => "trans-down",
        BidSlot::TransCurtail => "trans-curtail",
    }
}

fn resource_by_id(case: &MarketCase, id: &str) -> Option<ResourceRef> {
    if let Some(u) = case.unit_index(id) {
        return Some(ResourceRef::Unit(u));
    }
    // Loads accept both the bare node id and an N-prefixed form.
    let node = id.strip_prefix('N').unwrap_or(id);
    case.load_index(node).map(ResourceRef::Load)
}

fn candidate_index(ladder: &[f64], price: f64) -> Option<usize> {
    ladder.iter().position(|p| (p - price).abs() < 1e-9)
}

/// Read `{"U1": 96.8, ...}` into a per-unit day-ahead bid vector.
pub fn read_dam_bids(case: &MarketCase, path: &Path) -> Result<Vec<f64>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let map: BTreeMap<String, f64> =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut bids = Vec::with_capacity(case.units.len());
    for unit in &case.units {
        let b = map
            .get(&unit.id)
            .ok_or_else(|| format!("missing day-ahead bid for unit {}", unit.id))?;
        bids.push(*b);
    }
    Ok(bids)
}

/// Read a full strategy profile: `{"U1": {"dam": 96.8, "asm-up": 145.2,
/// "asm-down": 39.6}, "N5": {"asm-curtail": 229.77}, ...}`. Every price must
/// be one of the resource's candidates for that slot.
pub fn read_profile(
    case: &MarketCase,
    scheme: Scheme,
    path: &Path,
) -> Result<StrategyProfile, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let map: BTreeMap<String, BTreeMap<String, f64>> =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut profile = StrategyProfile::default();
    for (id, slots) in &map {
        let res = resource_by_id(case, id).ok_or_else(|| format!("unknown resource '{id}'"))?;
        for (slot_key, price) in slots {
            let slot = slots_for(case, scheme, res)
                .into_iter()
                .find(|s| slot_name(*s) == slot_key)
                .ok_or_else(|| {
                    format!("resource '{id}' has no '{slot_key}' bid under scheme {scheme}")
                })?;
            let ladder = case.ladder(res, slot.role());
            let a = candidate_index(ladder, *price).ok_or_else(|| {
                format!(
                    "price {price} is not a candidate of '{id}' {slot_key} (candidates: {ladder:?})"
                )
            })?;
            profile.set(res, slot, a);
        }
    }
    // Anything the file left out starts at the initialization values.
    let init = StrategyProfile::init(case, scheme);
    for (key, v) in init.choices {
        profile.choices.entry(key).or_insert(v);
    }
    profile.validate(case).map_err(|e| e.to_string())?;
    Ok(profile)
}

/// Render a profile as the same JSON shape `read_profile` accepts.
pub fn profile_to_json(case: &MarketCase, profile: &StrategyProfile) -> Result<String, String> {
    let mut map: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (key, &a) in &profile.choices {
        let id = match key.resource {
            ResourceRef::Unit(u) => case.units[u].id.clone(),
            ResourceRef::Load(l) => format!("N{}", case.loads[l].node),
        };
        let ladder = case.ladder(key.resource, key.slot.role());
        map.entry(id)
            .or_default()
            .insert(slot_name(key.slot).to_string(), ladder[a]);
    }
    serde_json::to_string_pretty(&map).map_err(|e| e.to_string())
}
