//! Thermal colour palettes.

use std::str::FromStr;

/// Maps a normalized thermal value in `[0, 1]` to an RGB triple on the
/// 0..=255 scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Colormap {
    /// The value replicated to all three channels.
    #[default]
    Gray,
    /// Black through purple, red and orange to white.
    Iron,
}

impl Colormap {
    #[inline]
    pub fn map(self, v: f64) -> [f64; 3] {
        let v = v.clamp(0.0, 1.0);
        match self {
            Colormap::Gray => [v * 255.0; 3],
            Colormap::Iron => {
                let [r, g, b] = IRON[(v * 255.0).round() as usize];
                [r as f64, g as f64, b as f64]
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Colormap::Gray => "gray",
            Colormap::Iron => "iron",
        }
    }
}

impl FromStr for Colormap {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gray" | "grey" => Ok(Colormap::Gray),
            "iron" => Ok(Colormap::Iron),
            other => Err(format!("unknown colormap '{other}' (expected gray or iron)")),
        }
    }
}

#[rustfmt::skip]
static IRON: [[u8; 3]; 256] = [
    [0, 0, 0], [1, 0, 2], [2, 0, 5], [2, 0, 7],
    [3, 0, 9], [4, 0, 12], [5, 0, 14], [5, 0, 16],
    [6, 0, 19], [7, 0, 21], [8, 0, 24], [9, 0, 26],
    [9, 0, 28], [10, 0, 31], [11, 0, 33], [12, 0, 35],
    [13, 0, 38], [13, 0, 40], [14, 0, 42], [15, 0, 45],
    [16, 0, 47], [16, 0, 49], [17, 0, 52], [18, 0, 54],
    [19, 0, 56], [20, 0, 59], [20, 0, 61], [21, 0, 64],
    [22, 0, 66], [23, 0, 68], [24, 0, 71], [24, 0, 73],
    [25, 0, 75], [26, 0, 78], [27, 0, 80], [27, 0, 82],
    [28, 0, 85], [29, 0, 87], [30, 0, 89], [32, 0, 91],
    [34, 0, 92], [36, 0, 94], [38, 0, 95], [40, 0, 97],
    [42, 0, 98], [44, 0, 99], [46, 0, 101], [48, 0, 102],
    [50, 0, 103], [52, 0, 105], [54, 0, 106], [56, 0, 108],
    [59, 0, 109], [61, 0, 110], [63, 0, 112], [65, 0, 113],
    [67, 0, 115], [69, 0, 116], [71, 0, 117], [73, 0, 119],
    [75, 0, 120], [77, 0, 121], [79, 0, 123], [81, 0, 124],
    [83, 0, 126], [86, 0, 127], [88, 0, 128], [90, 0, 130],
    [92, 0, 131], [94, 0, 133], [96, 0, 134], [98, 0, 135],
    [100, 0, 137], [102, 0, 138], [104, 0, 139], [106, 0, 141],
    [108, 0, 142], [110, 0, 144], [113, 0, 145], [115, 0, 146],
    [117, 0, 148], [119, 0, 149], [121, 0, 150], [122, 1, 148],
    [124, 2, 147], [126, 2, 146], [128, 3, 145], [129, 4, 144],
    [131, 4, 143], [133, 5, 142], [135, 5, 141], [136, 6, 140],
    [138, 7, 139], [140, 7, 138], [142, 8, 136], [143, 9, 135],
    [145, 9, 134], [147, 10, 133], [149, 11, 132], [150, 11, 131],
    [152, 12, 130], [154, 13, 129], [156, 13, 128], [157, 14, 127],
    [159, 15, 126], [161, 15, 125], [163, 16, 123], [164, 17, 122],
    [166, 17, 121], [168, 18, 120], [169, 19, 119], [171, 19, 118],
    [173, 20, 117], [175, 21, 116], [176, 21, 115], [178, 22, 114],
    [180, 22, 113], [182, 23, 111], [183, 24, 110], [185, 24, 109],
    [187, 25, 108], [189, 26, 107], [190, 26, 106], [192, 27, 105],
    [194, 28, 104], [196, 28, 103], [197, 29, 102], [199, 30, 101],
    [201, 31, 99], [202, 32, 97], [203, 34, 95], [204, 35, 93],
    [205, 37, 91], [206, 39, 88], [207, 40, 86], [208, 42, 84],
    [209, 43, 82], [210, 45, 80], [211, 46, 78], [212, 48, 76],
    [213, 50, 74], [214, 51, 72], [215, 53, 70], [216, 54, 68],
    [217, 56, 65], [218, 57, 63], [219, 59, 61], [220, 61, 59],
    [221, 62, 57], [222, 64, 55], [224, 65, 53], [225, 67, 51],
    [226, 68, 49], [227, 70, 47], [228, 72, 45], [229, 73, 42],
    [230, 75, 40], [231, 76, 38], [232, 78, 36], [233, 79, 34],
    [234, 81, 32], [235, 83, 30], [236, 84, 28], [237, 86, 26],
    [238, 87, 24], [239, 89, 22], [240, 90, 20], [240, 92, 19],
    [241, 94, 19], [241, 96, 18], [242, 98, 18], [242, 100, 17],
    [242, 102, 17], [243, 104, 16], [243, 106, 16], [244, 108, 15],
    [244, 110, 15], [244, 112, 14], [245, 114, 14], [245, 116, 13],
    [246, 118, 13], [246, 120, 12], [246, 122, 12], [247, 124, 11],
    [247, 126, 10], [248, 128, 10], [248, 130, 9], [248, 132, 9],
    [249, 134, 8], [249, 136, 8], [250, 138, 7], [250, 140, 7],
    [250, 141, 6], [251, 143, 6], [251, 145, 5], [251, 147, 5],
    [252, 149, 4], [252, 151, 4], [253, 153, 3], [253, 155, 3],
    [253, 157, 2], [254, 159, 2], [254, 161, 1], [255, 163, 1],
    [255, 165, 0], [255, 167, 2], [255, 169, 5], [255, 171, 7],
    [255, 173, 9], [255, 175, 11], [255, 177, 14], [255, 179, 16],
    [255, 181, 18], [255, 183, 21], [255, 185, 23], [255, 187, 25],
    [255, 189, 27], [255, 190, 30], [255, 192, 32], [255, 194, 34],
    [255, 196, 37], [255, 198, 39], [255, 200, 41], [255, 202, 43],
    [255, 204, 46], [255, 206, 48], [255, 208, 50], [255, 210, 53],
    [255, 212, 55], [255, 214, 57], [255, 216, 59], [255, 218, 62],
    [255, 220, 64], [255, 222, 66], [255, 224, 69], [255, 226, 74],
    [255, 227, 83], [255, 229, 92], [255, 230, 101], [255, 231, 110],
    [255, 233, 119], [255, 234, 128], [255, 236, 137], [255, 237, 146],
    [255, 239, 155], [255, 240, 164], [255, 242, 173], [255, 243, 182],
    [255, 245, 192], [255, 246, 201], [255, 248, 210], [255, 249, 219],
    [255, 251, 228], [255, 252, 237], [255, 254, 246], [255, 255, 255],
];
