//! Pseudo-locations inside a tower sector and region lookup.

use mobility_pm::geo::{
    assign_region, event_seed, haversine_distance, sample_sector_point, GeoPoint, RegionIndex,
    RegionLevel, TowerSector,
};
use mobility_pm::synth::{grid_regions, RegionGrid, TowerGrid};

fn main() -> mobility_pm::Result<()> {
    let origin = GeoPoint::new(38.70, -9.30)?;
    let regions = RegionIndex::new(grid_regions(
        origin,
        &TowerGrid::default(),
        &RegionGrid::default(),
    ))?;
    let center = GeoPoint::new(38.72, -9.25)?;
    let sector = TowerSector::new("C17", center, 120.0, 60.0, 800.0)?;

    for (i, ts) in [1_706_770_000, 1_706_770_600, 1_706_771_200]
        .into_iter()
        .enumerate()
    {
        let p = sample_sector_point(&sector, event_seed(&sector.cell_id, "u1", ts), &regions, 64)?;
        println!(
            "event {i}: ({:.5}, {:.5}) {:6.1} m from the mast, parish {:?}, municipality {:?}",
            p.lat,
            p.lon,
            haversine_distance(center, p),
            assign_region(p, &regions, RegionLevel::Parish),
            assign_region(p, &regions, RegionLevel::Municipality),
        );
    }
    Ok(())
}
