//! Single-image GeoTIFF reading and writing.
//!
//! Georeferencing uses the ModelPixelScale/ModelTiepoint pair (north-up
//! rasters only), the projected or geographic CRS code from the GeoKey
//! directory, and the GDAL nodata tag.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use roofsense_core::RasterGrid;
use tiff::decoder::{Decoder, DecodingResult, Limits};
use tiff::encoder::{colortype, TiffEncoder};
use tiff::tags::Tag;
use tiff::ColorType;

use crate::{Error, Result};

const GT_MODEL_TYPE: u16 = 1024;
const GT_RASTER_TYPE: u16 = 1025;
const GT_CITATION: u16 = 1026;
const GEOGRAPHIC_TYPE: u16 = 2048;
const PROJECTED_CS_TYPE: u16 = 3072;
const USER_DEFINED: u16 = 32767;
const GEO_ASCII_PARAMS: u16 = 34737;

/// Reads band-interleaved samples of any integer or float type into `f32`.
pub fn load_raster(path: impl AsRef<Path>) -> Result<RasterGrid> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let fail = |e: tiff::TiffError| Error::format(path, e);
    let mut dec = Decoder::new(BufReader::new(file)).map_err(fail)?.with_limits(Limits::unlimited());
    let (width, height) = dec.dimensions().map_err(fail)?;
    let bands = match dec.colortype().map_err(fail)? {
        ColorType::Gray(_) => 1,
        ColorType::GrayA(_) => 2,
        ColorType::RGB(_) => 3,
        ColorType::RGBA(_) => 4,
        ColorType::Multiband { num_samples, .. } => num_samples as usize,
        other => return Err(Error::format(path, format!("unsupported color type {other:?}"))),
    };
    let scale = dec
        .find_tag(Tag::ModelPixelScaleTag)
        .map_err(fail)?
        .ok_or_else(|| Error::format(path, "missing ModelPixelScale tag"))?
        .into_f64_vec()
        .map_err(fail)?;
    let tie = dec
        .find_tag(Tag::ModelTiepointTag)
        .map_err(fail)?
        .ok_or_else(|| Error::format(path, "missing ModelTiepoint tag"))?
        .into_f64_vec()
        .map_err(fail)?;
    if scale.len() < 2 || tie.len() < 6 {
        return Err(Error::format(path, "malformed georeferencing tags"));
    }
    if (scale[0] - scale[1]).abs() > 1e-9 * scale[0].abs().max(1.0) {
        return Err(Error::format(path, format!("non-square cells {}x{}", scale[0], scale[1])));
    }
    let cell = scale[0];
    let origin = (tie[3] - tie[0] * cell, tie[4] + tie[1] * cell);
    let crs = read_crs(&mut dec).map_err(fail)?;
    let nodata = match dec.find_tag(Tag::GdalNodata).map_err(fail)? {
        Some(v) => {
            let s = v.into_string().map_err(fail)?;
            let s = s.trim_matches(|c: char| c == '\0' || c.is_whitespace());
            Some(s.parse::<f32>().map_err(|_| Error::format(path, format!("bad nodata value {s:?}")))?)
        }
        None => None,
    };
    let interleaved: Vec<f32> = match dec.read_image().map_err(fail)? {
        DecodingResult::U8(v) => v.into_iter().map(f32::from).collect(),
        DecodingResult::U16(v) => v.into_iter().map(f32::from).collect(),
        DecodingResult::U32(v) => v.into_iter().map(|x| x as f32).collect(),
        DecodingResult::U64(v) => v.into_iter().map(|x| x as f32).collect(),
        DecodingResult::I8(v) => v.into_iter().map(f32::from).collect(),
        DecodingResult::I16(v) => v.into_iter().map(f32::from).collect(),
        DecodingResult::I32(v) => v.into_iter().map(|x| x as f32).collect(),
        DecodingResult::I64(v) => v.into_iter().map(|x| x as f32).collect(),
        DecodingResult::F32(v) => v,
        DecodingResult::F64(v) => v.into_iter().map(|x| x as f32).collect(),
        DecodingResult::F16(v) => v.into_iter().map(f32::from).collect(),
    };
    let (w, h) = (width as usize, height as usize);
    if interleaved.len() != w * h * bands {
        return Err(Error::format(path, "sample count does not match image size"));
    }
    let mut values = vec![0.0; interleaved.len()];
    for (i, px) in interleaved.chunks_exact(bands).enumerate() {
        for (b, &v) in px.iter().enumerate() {
            values[b * w * h + i] = v;
        }
    }
    Ok(RasterGrid::new(w, h, bands, cell, origin, crs, nodata, values)?)
}

fn read_crs<R: std::io::Read + std::io::Seek>(dec: &mut Decoder<R>) -> tiff::TiffResult<String> {
    let Some(dir) = dec.find_tag(Tag::GeoKeyDirectoryTag)? else {
        return Ok("unknown".into());
    };
    let keys: Vec<u16> = dir.into_u16_vec()?;
    let mut citation = None;
    for key in keys.get(4..).unwrap_or(&[]).chunks_exact(4) {
        let (id, loc, count, value) = (key[0], key[1], key[2], key[3]);
        match id {
            PROJECTED_CS_TYPE | GEOGRAPHIC_TYPE if loc == 0 && value != USER_DEFINED => {
                return Ok(format!("EPSG:{value}"));
            }
            GT_CITATION if loc == GEO_ASCII_PARAMS => citation = Some((value as usize, count as usize)),
            _ => {}
        }
    }
    if let Some((offset, count)) = citation {
        if let Some(params) = dec.find_tag(Tag::Unknown(GEO_ASCII_PARAMS))? {
            let s = params.into_string()?;
            let end = (offset + count).min(s.len());
            let text = s.get(offset..end).unwrap_or("").trim_end_matches(['|', '\0']);
            if !text.is_empty() {
                return Ok(text.to_string());
            }
        }
    }
    Ok("unknown".into())
}

/// Writes a raster as a float GeoTIFF, or as 8-bit RGB when `rgb8` is set
/// and the grid has three bands.
pub fn save_raster(path: impl AsRef<Path>, raster: &RasterGrid, rgb8: bool) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let fail = |e: tiff::TiffError| Error::format(path, e);
    let mut enc = TiffEncoder::new(BufWriter::new(file)).map_err(fail)?;
    let (w, h, bands) = (raster.width(), raster.height(), raster.bands());
    let mut interleaved = vec![0.0f32; w * h * bands];
    for b in 0..bands {
        for (i, &v) in raster.band(b).iter().enumerate() {
            interleaved[i * bands + b] = v;
        }
    }
    let (x0, y0) = raster.origin();
    let cell = raster.cell_size();
    let (geokeys, ascii) = geokeys(raster.crs_id());
    let nodata = raster.nodata().map(|v| format!("{v}"));

    macro_rules! write {
        ($ct:ty, $data:expr) => {{
            let mut img = enc.new_image::<$ct>(w as u32, h as u32).map_err(fail)?;
            let dir = img.encoder();
            dir.write_tag(Tag::ModelPixelScaleTag, &[cell, cell, 0.0][..]).map_err(fail)?;
            dir.write_tag(Tag::ModelTiepointTag, &[0.0, 0.0, 0.0, x0, y0, 0.0][..]).map_err(fail)?;
            dir.write_tag(Tag::GeoKeyDirectoryTag, &geokeys[..]).map_err(fail)?;
            if let Some(a) = &ascii {
                dir.write_tag(Tag::Unknown(GEO_ASCII_PARAMS), a.as_str()).map_err(fail)?;
            }
            if let Some(nd) = &nodata {
                dir.write_tag(Tag::GdalNodata, nd.as_str()).map_err(fail)?;
            }
            img.write_data($data).map_err(fail)?;
        }};
    }

    match bands {
        3 if rgb8 => {
            let bytes: Vec<u8> = interleaved.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
            write!(colortype::RGB8, &bytes)
        }
        1 => write!(colortype::Gray32Float, &interleaved),
        3 => write!(colortype::RGB32Float, &interleaved),
        4 => write!(colortype::RGBA32Float, &interleaved),
        n => return Err(Error::format(path, format!("cannot write {n}-band raster"))),
    }
    Ok(())
}

fn geokeys(crs: &str) -> (Vec<u16>, Option<String>) {
    let code = crs.strip_prefix("EPSG:").and_then(|c| c.parse::<u16>().ok());
    let mut keys = vec![1, 1, 0, 0, GT_MODEL_TYPE, 0, 1, 1, GT_RASTER_TYPE, 0, 1, 1];
    let mut ascii = None;
    match code {
        Some(c) if (4000..5000).contains(&c) => {
            keys[7] = 2;
            keys.extend([GEOGRAPHIC_TYPE, 0, 1, c]);
        }
        Some(c) => keys.extend([PROJECTED_CS_TYPE, 0, 1, c]),
        None => {
            let text = format!("{crs}|");
            keys.extend([GT_CITATION, GEO_ASCII_PARAMS, text.len() as u16, 0]);
            keys.extend([PROJECTED_CS_TYPE, 0, 1, USER_DEFINED]);
            ascii = Some(text);
        }
    }
    keys[3] = ((keys.len() - 4) / 4) as u16;
    (keys, ascii)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_round_trip_keeps_georeferencing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.tif");
        let g = RasterGrid::new(3, 2, 1, 0.5, (600000.0, 1700000.0), "EPSG:32620", Some(-9999.0), vec![1.0, 2.0, -9999.0, 4.5, 5.0, 6.0])
            .unwrap();
        save_raster(&p, &g, false).unwrap();
        assert_eq!(load_raster(&p).unwrap(), g);
    }

    #[test]
    fn rgb8_and_custom_crs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rgb.tif");
        let vals: Vec<f32> = (0..12).map(|i| (i * 20) as f32).collect();
        let g = RasterGrid::new(2, 2, 3, 0.2, (10.0, 20.0), "local grid", None, vals).unwrap();
        save_raster(&p, &g, true).unwrap();
        let back = load_raster(&p).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.cell_size(), 0.2);
    }

    #[test]
    fn single_cell_raster() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("one.tif");
        let g = RasterGrid::new(1, 1, 1, 1.0, (0.0, 1.0), "EPSG:4326", None, vec![5.0]).unwrap();
        save_raster(&p, &g, false).unwrap();
        let back = load_raster(&p).unwrap();
        assert_eq!((back.width(), back.height(), back.band(0)), (1, 1, &[5.0][..]));
        assert_eq!(back.crs_id(), "EPSG:4326");
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = load_raster("/nonexistent/x.tif").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.tif"));
    }
}
