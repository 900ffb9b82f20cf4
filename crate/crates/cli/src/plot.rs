//! Minimal SVG emitter: points, segments and polylines on the unit square.
//! No plotting dependency; enough for fiber maps, witness scatters and
//! direction quivers.

pub struct Svg {
    width: f64,
    height: f64,
    body: String,
}

impl Svg {
    pub fn unit_square(size: f64) -> Svg {
        let mut svg = Svg {
            width: size,
            height: size,
            body: String::new(),
        };
        svg.body.push_str(&format!(
            "<rect x=\"0\" y=\"0\" width=\"{size}\" height=\"{size}\" fill=\"white\" stroke=\"black\"/>\n"
        ));
        svg
    }

    fn tx(&self, p: [f64; 2]) -> (f64, f64) {
        // Flip y so the origin sits bottom-left.
        (p[0] * self.width, (1.0 - p[1]) * self.height)
    }

    pub fn point(&mut self, p: [f64; 2], radius: f64, color: &str) {
        let (x, y) = self.tx(p);
        self.body.push_str(&format!(
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{radius}\" fill=\"{color}\"/>\n"
        ));
    }

    pub fn segment(&mut self, a: [f64; 2], b: [f64; 2], color: &str) {
        let (x1, y1) = self.tx(a);
        let (x2, y2) = self.tx(b);
        self.body.push_str(&format!(
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{color}\" stroke-width=\"1\"/>\n"
        ));
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\">\n{}</svg>\n",
            self.width, self.height, self.body
        )
    }
}
